"""The six click/conversion model designs as one parameterized family.

Every design is described by three boolean characteristics:

* shared_params  - one trunk feeding both task heads vs. disjoint towers
* entire_space   - the conversion-side loss targets the joint event
                   p(conversion, click | x) on all impressions, instead of
                   the conditional p(conversion | click, x) on clicked ones
* weighted_cvr   - the joint prediction is composed as the click sigmoid
                   times an implicit conditional-conversion sigmoid, so the
                   conversion loss is implicitly weighted by the click
                   prediction (the reconnection adds no trainable parameters
                   and no loss is attached to the implicit node itself)

The name -> flags table below is asserted as data in the test suite. Wiring:

* IP          two disjoint towers; CTR tower trained on all impressions,
              CVR tower on the clicked subset; joint = product of the two.
* IPSP        shared trunk, two heads, same losses as IP (conversion head
              gets weight zero on unclicked examples).
* ESSP-Split  shared trunk, two heads predicting p(click|x) and the joint
              directly, with no constraint tying them together (the heads
              may be inconsistent; the violation rate is reported, never
              clipped).
* ESMM        shared trunk, click sigmoid x implicit conversion sigmoid.
* ESMM-NS     ESMM losses with two disjoint towers.
* ESP         single tower, single joint head; no click prediction exists.

Models are mutable during training only; a trained model is safe for
concurrent read-only prediction.
"""

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad

MODEL_NAMES = ("IP", "ESMM", "ESMM-NS", "ESSP-Split", "IPSP", "ESP")


@dataclass(frozen=True)
class ModelCharacteristics:
    shared_params: bool
    entire_space: bool
    weighted_cvr: bool
    name: str


MODEL_TABLE = {
    "IP": ModelCharacteristics(False, False, False, "IP"),
    "ESMM": ModelCharacteristics(True, True, True, "ESMM"),
    "ESMM-NS": ModelCharacteristics(False, True, True, "ESMM-NS"),
    "ESSP-Split": ModelCharacteristics(True, True, False, "ESSP-Split"),
    "IPSP": ModelCharacteristics(True, False, False, "IPSP"),
    "ESP": ModelCharacteristics(False, True, False, "ESP"),
}


@dataclass(frozen=True)
class NetworkConfig:
    """Network dimensions shared by every design.

    Two trunk layers after the feature embeddings, then two layers per head,
    by default. Head widths are kept small relative to embeddings and trunk
    so single-graph designs (one or two heads) stay within 5% of each other
    in trainable-parameter count; the dual-tower designs (IP, ESMM-NS) run
    about twice the single-tower count.
    """

    dense_input_dim: int = 16
    n_categorical: int = 2
    vocab_size: int = 100
    embedding_dim: int = 16
    shared_layer_dims: tuple = (64, 32)
    head_layer_dims: tuple = (8, 8)

    def __post_init__(self):
        object.__setattr__(self, "shared_layer_dims", tuple(self.shared_layer_dims))
        object.__setattr__(self, "head_layer_dims", tuple(self.head_layer_dims))
        if len(self.shared_layer_dims) != 2 or len(self.head_layer_dims) != 2:
            raise ValueError("shared_layer_dims and head_layer_dims need exactly 2 entries")
        dims = (self.dense_input_dim, self.embedding_dim,
                *self.shared_layer_dims, *self.head_layer_dims)
        if any(d <= 0 for d in dims) or self.vocab_size <= 0:
            raise ValueError(f"network dims must be positive, got {self}")
        if self.n_categorical < 0:
            raise ValueError("n_categorical must be nonnegative")


class _Stack:
    """Feature embeddings plus the two trunk layers."""

    def __init__(self, net, rng, name):
        self.embeddings = [
            ad.EmbeddingTable(net.vocab_size, net.embedding_dim, rng,
                              name=f"{name}.emb{j}")
            for j in range(net.n_categorical)
        ]
        in_dim = net.dense_input_dim + net.n_categorical * net.embedding_dim
        dims = [in_dim, *net.shared_layer_dims]
        self.layers = [
            ad.DenseLayer(dims[i], dims[i + 1], rng, name=f"{name}.trunk{i}")
            for i in range(len(dims) - 1)
        ]
        self.out_dim = dims[-1]

    def forward(self, tape, dense, cats):
        parts = [tape.constant(dense)]
        parts += [emb.lookup(tape, cats[:, j]) for j, emb in enumerate(self.embeddings)]
        h = ad.concat(parts, axis=-1) if len(parts) > 1 else parts[0]
        for layer in self.layers:
            h = ad.relu(layer(h))
        return h

    def params(self):
        out = []
        for emb in self.embeddings:
            out += emb.params()
        for layer in self.layers:
            out += layer.params()
        return out


class _Head:
    """Two head layers plus a single-logit output, ending in a sigmoid."""

    def __init__(self, in_dim, net, rng, name):
        dims = [in_dim, *net.head_layer_dims]
        self.layers = [
            ad.DenseLayer(dims[i], dims[i + 1], rng, name=f"{name}.layer{i}")
            for i in range(len(dims) - 1)
        ]
        self.out = ad.DenseLayer(dims[-1], 1, rng, name=f"{name}.out")

    def forward(self, h):
        for layer in self.layers:
            h = ad.relu(layer(h))
        logit = ad.reshape(self.out(h), (h.value.shape[0],))
        return ad.sigmoid(logit)

    def params(self):
        out = []
        for layer in self.layers:
            out += layer.params()
        return out + self.out.params()


class Model:
    """A built design: towers, heads, and the prediction compositions."""

    def __init__(self, characteristics, net, stacks, heads, wiring):
        self.characteristics = characteristics
        self.net = net
        self._stacks = stacks          # name -> _Stack
        self._heads = heads            # name -> _Head
        self._wiring = wiring          # head name -> stack name

    @property
    def name(self):
        return self.characteristics.name

    def head_names(self):
        return tuple(self._heads)

    def has_ctr_head(self):
        return "ctr" in self._heads

    def cvr_loss_key(self):
        """Which forward output the conversion-side loss attaches to."""
        return "joint" if self.characteristics.entire_space else "cvr"

    def parameters(self):
        out = []
        for stack_name in self._stacks:
            out += self._stacks[stack_name].params()
            for head_name, tower in self._wiring.items():
                if tower == stack_name:
                    out += self._heads[head_name].params()
        return out

    def tower_parameters(self, head_name):
        """Parameters of one tower: its stack plus the named head."""
        stack = self._stacks[self._wiring[head_name]]
        return stack.params() + self._heads[head_name].params()

    def head_exclusive_parameters(self, head_name):
        """Parameters belonging to the named head only (not the trunk)."""
        return self._heads[head_name].params()

    def parameter_count(self):
        return sum(p.value.size for p in self.parameters())

    def forward_heads(self, tape, dense, cats):
        """Run every head on one tape; returns nodes keyed ctr/cvr/joint.

        The joint output is the product of the click and conditional
        sigmoids for composed designs (exact, so joint <= ctr always), the
        direct head for ESSP-Split and ESP.
        """
        dense = np.asarray(dense, dtype=np.float64)
        cats = np.asarray(cats, dtype=np.int64)
        if dense.ndim != 2:
            raise ValueError("forward_heads expects a batch (n, dense_dim)")
        reps = {name: stack.forward(tape, dense, cats)
                for name, stack in self._stacks.items()}
        out = {name: self._heads[name].forward(reps[self._wiring[name]])
               for name in self._heads}
        if "joint" not in out:
            out["joint"] = ad.multiply(out["ctr"], out["cvr"])
        return out

    def predict_all(self, dense, cats):
        """Raw-array predictions for a batch; no gradients retained."""
        tape = ad.Tape()
        nodes = self.forward_heads(tape, dense, cats)
        return {name: node.value for name, node in nodes.items()}

    def predict_dataset(self, ds):
        return self.predict_all(ds.dense, ds.cats)

    def _predict_one(self, key, dense, cats):
        dense = np.asarray(dense, dtype=np.float64)
        cats = np.asarray(cats, dtype=np.int64)
        single = dense.ndim == 1
        if single:
            dense = dense[None, :]
            cats = cats[None, :]
        out = self.predict_all(dense, cats)[key]
        return float(out[0]) if single else out

    def predict_joint(self, dense, cats):
        """p(conversion, click | x): the ranking quantity of interest."""
        return self._predict_one("joint", dense, cats)

    def predict_ctr(self, dense, cats):
        if not self.has_ctr_head():
            raise ValueError(f"{self.name} has no CTR head")
        return self._predict_one("ctr", dense, cats)

    def predict_cvr_given_click(self, dense, cats):
        """Conditional conversion prediction, where the design defines one.

        IP and IPSP expose their explicit conditional head; ESMM and ESMM-NS
        expose the implicit node. ESSP-Split and ESP have no conditional
        entity and raise.
        """
        if "cvr" not in self._heads:
            raise ValueError(f"{self.name} has no conditional conversion head")
        return self._predict_one("cvr", dense, cats)

    def loss_weights(self, example):
        """(ctr_weight, cvr_weight) for one example under this design's regime.

        The regime weight (1, or 0 where a head is switched off) is
        multiplied by the example's calibration weight.
        """
        ctr_w, cvr_w = self._loss_weight_arrays(
            np.asarray([example.click]), np.asarray([example.weight]))
        return float(ctr_w[0]), float(cvr_w[0])

    def _loss_weight_arrays(self, click, weight):
        click = np.asarray(click, dtype=np.float64)
        weight = np.asarray(weight, dtype=np.float64)
        name = self.name
        if name == "ESP":
            return np.zeros_like(weight), weight
        if name in ("IP", "IPSP"):
            return weight, weight * click
        # ESMM, ESMM-NS, ESSP-Split: both heads see every sample.
        return weight, weight.copy()

    def save(self, path):
        """Flat text format: design name, dimensions, then parameter matrices."""
        lines = ["funnellab-model v1",
                 f"name: {self.name}",
                 f"dense_input_dim: {self.net.dense_input_dim}",
                 f"n_categorical: {self.net.n_categorical}",
                 f"vocab_size: {self.net.vocab_size}",
                 f"embedding_dim: {self.net.embedding_dim}",
                 f"shared_layer_dims: {','.join(map(str, self.net.shared_layer_dims))}",
                 f"head_layer_dims: {','.join(map(str, self.net.head_layer_dims))}"]
        for param in self.parameters():
            mat = np.atleast_2d(param.value)
            lines.append(f"param: {param.name} {mat.shape[0]} {mat.shape[1]}")
            for row in mat:
                lines.append(" ".join(repr(float(v)) for v in row))
        with open(path, "w") as fh:
            fh.write("\n".join(lines) + "\n")

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            lines = fh.read().splitlines()
        if not lines or lines[0] != "funnellab-model v1":
            raise ValueError(f"not a funnellab model file: {path}")
        fields = {}
        i = 1
        while i < len(lines) and not lines[i].startswith("param:"):
            key, value = lines[i].split(":", 1)
            fields[key.strip()] = value.strip()
            i += 1
        net = NetworkConfig(
            dense_input_dim=int(fields["dense_input_dim"]),
            n_categorical=int(fields["n_categorical"]),
            vocab_size=int(fields["vocab_size"]),
            embedding_dim=int(fields["embedding_dim"]),
            shared_layer_dims=tuple(int(v) for v in fields["shared_layer_dims"].split(",")),
            head_layer_dims=tuple(int(v) for v in fields["head_layer_dims"].split(",")))
        model = build(fields["name"], net, seed=0)
        for param in model.parameters():
            header = lines[i].split()
            if header[0] != "param:" or header[1] != param.name:
                raise ValueError(f"unexpected parameter record {lines[i]!r}, wanted {param.name}")
            rows, cols = int(header[2]), int(header[3])
            block = np.array([[float(v) for v in lines[i + 1 + r].split()]
                              for r in range(rows)])
            param.value[...] = block.reshape(param.value.shape)
            i += 1 + rows
        return model


def build(name, net_config, seed):
    """Construct one of the six designs with deterministic initialization.

    Towers are initialized in a fixed order (click-side first), so the CTR
    tower of a dual-tower design and a standalone single tower built from
    the same seed are parameter-identical.
    """
    if name not in MODEL_TABLE:
        raise ValueError(f"unknown model {name!r}; expected one of {MODEL_NAMES}")
    chars = MODEL_TABLE[name]
    rng = np.random.default_rng(seed)
    if name in ("IP", "ESMM-NS"):
        ctr_stack = _Stack(net_config, rng, "ctr_tower")
        ctr_head = _Head(ctr_stack.out_dim, net_config, rng, "ctr")
        cvr_stack = _Stack(net_config, rng, "cvr_tower")
        cvr_head = _Head(cvr_stack.out_dim, net_config, rng, "cvr")
        stacks = {"ctr_tower": ctr_stack, "cvr_tower": cvr_stack}
        heads = {"ctr": ctr_head, "cvr": cvr_head}
        wiring = {"ctr": "ctr_tower", "cvr": "cvr_tower"}
    elif name == "ESP":
        stack = _Stack(net_config, rng, "shared")
        heads = {"joint": _Head(stack.out_dim, net_config, rng, "joint")}
        stacks = {"shared": stack}
        wiring = {"joint": "shared"}
    else:  # IPSP, ESMM, ESSP-Split: shared trunk, two heads
        stack = _Stack(net_config, rng, "shared")
        second = "joint" if name == "ESSP-Split" else "cvr"
        heads = {"ctr": _Head(stack.out_dim, net_config, rng, "ctr"),
                 second: _Head(stack.out_dim, net_config, rng, second)}
        stacks = {"shared": stack}
        wiring = {"ctr": "shared", second: "shared"}
    return Model(chars, net_config, stacks, heads, wiring)
