"""Random flows on finite rooted trees, and the truncation bound they rest on.

Each edge e carries an independent capacity Y(e) ~ Exponential(mean m(e)).
The maximum flow from the root to the leaves is computed by the usual
recursion: a leaf edge passes its own capacity, an internal edge passes
min(Y(e), sum of child flows).  The deterministic comparison point is the
series/parallel effective conductance C with edge conductances m(e):
C(e) = m(e) at leaf edges and 1 / (1/m(e) + 1/sum C(child)) inside.  The
expected flow is sandwiched between C and 2C.

The sandwich's engine is a scalar fact about truncating by an exponential:
for Z >= 0 independent of Y ~ Exponential(rate theta),

    E[min(Z, Y)] <= 2 E[Z] / (2 + theta E[Z]),

checked here both in closed form for point masses and by Monte Carlo for
general Z.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .rng import Stream, derive_key, exponentials, uniforms

__all__ = [
    "TreeNode",
    "TreeSpec",
    "TreeParseError",
    "tree_from_json",
    "tree_to_json",
    "load_tree",
    "edge_means",
    "effective_conductance",
    "max_flow",
    "max_flow_batch",
    "min_cut_capacity",
    "sample_capacities",
    "sample_capacities_batch",
    "FlowSandwichReport",
    "verify_flow_sandwich",
    "random_tree",
    "ZDist",
    "parse_zdist",
    "min_exp_closed_form",
    "truncation_rhs",
    "TruncationReport",
    "check_truncation_bound",
]


class TreeParseError(ValueError):
    pass


@dataclass(frozen=True)
class TreeNode:
    mean: float
    children: tuple["TreeNode", ...] = ()


@dataclass(frozen=True)
class TreeSpec:
    """A rooted tree given by the root's child nodes; each node is an edge
    (to its parent) with a positive capacity mean."""

    children: tuple[TreeNode, ...]

    def __post_init__(self):
        if not self.children:
            raise TreeParseError("tree needs at least one edge")

    def n_edges(self) -> int:
        def count(node: TreeNode) -> int:
            return 1 + sum(count(c) for c in node.children)

        return sum(count(c) for c in self.children)


def _node_from_json(obj, path: str) -> TreeNode:
    if not isinstance(obj, dict):
        raise TreeParseError(f"{path}: node must be an object, got {type(obj).__name__}")
    unknown = set(obj) - {"mean", "children"}
    if unknown:
        raise TreeParseError(f"{path}: unknown keys {sorted(unknown)}")
    if "mean" not in obj:
        raise TreeParseError(f"{path}: missing 'mean'")
    mean = obj["mean"]
    if not isinstance(mean, (int, float)) or isinstance(mean, bool):
        raise TreeParseError(f"{path}: 'mean' must be a number")
    mean = float(mean)
    if not (math.isfinite(mean) and mean > 0.0):
        raise TreeParseError(f"{path}: 'mean' must be positive and finite, got {mean}")
    kids = obj.get("children", [])
    if not isinstance(kids, list):
        raise TreeParseError(f"{path}: 'children' must be a list")
    children = tuple(
        _node_from_json(c, f"{path}.children[{i}]") for i, c in enumerate(kids)
    )
    return TreeNode(mean=mean, children=children)


def tree_from_json(obj) -> TreeSpec:
    if not isinstance(obj, dict) or "children" not in obj:
        raise TreeParseError("root must be an object with a 'children' list")
    kids = obj["children"]
    if not isinstance(kids, list) or not kids:
        raise TreeParseError("root 'children' must be a nonempty list")
    return TreeSpec(
        children=tuple(_node_from_json(c, f"children[{i}]") for i, c in enumerate(kids))
    )


def tree_to_json(tree: TreeSpec) -> dict:
    def enc(node: TreeNode) -> dict:
        out = {"mean": node.mean}
        if node.children:
            out["children"] = [enc(c) for c in node.children]
        return out

    return {"children": [enc(c) for c in tree.children]}


def load_tree(path: str) -> TreeSpec:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            obj = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise TreeParseError(f"cannot read tree file {path!r}: {exc}") from exc
    return tree_from_json(obj)


@dataclass(frozen=True)
class _FlatTree:
    """Preorder edge arrays: means, child ids per edge, root edge ids."""

    means: np.ndarray
    children: tuple[tuple[int, ...], ...]
    roots: tuple[int, ...]
    postorder: tuple[int, ...]


def _flatten(tree: TreeSpec) -> _FlatTree:
    means: list[float] = []
    children: list[tuple[int, ...]] = []

    def walk(node: TreeNode) -> int:
        idx = len(means)
        means.append(node.mean)
        children.append(())
        children[idx] = tuple(walk(c) for c in node.children)
        return idx

    roots = tuple(walk(c) for c in tree.children)
    post: list[int] = []

    def post_walk(idx: int) -> None:
        for c in children[idx]:
            post_walk(c)
        post.append(idx)

    for rdx in roots:
        post_walk(rdx)
    return _FlatTree(
        means=np.array(means, dtype=np.float64),
        children=tuple(children),
        roots=roots,
        postorder=tuple(post),
    )


def edge_means(tree: TreeSpec) -> np.ndarray:
    """Capacity means in preorder edge numbering (the sampling order)."""
    return _flatten(tree).means


def effective_conductance(tree: TreeSpec) -> float:
    def cond(node: TreeNode) -> float:
        if not node.children:
            return node.mean
        s = sum(cond(c) for c in node.children)
        return 1.0 / (1.0 / node.mean + 1.0 / s)

    return sum(cond(c) for c in tree.children)


def max_flow(tree: TreeSpec, caps: np.ndarray) -> float:
    flat = _flatten(tree)
    caps = np.asarray(caps, dtype=np.float64)
    if caps.shape != flat.means.shape:
        raise ValueError(f"capacities shape {caps.shape} != edges {flat.means.shape}")
    flow = np.empty_like(caps)
    for e in flat.postorder:
        kids = flat.children[e]
        if not kids:
            flow[e] = caps[e]
        else:
            flow[e] = min(caps[e], sum(float(flow[c]) for c in kids))
    return float(sum(float(flow[e]) for e in flat.roots))


def max_flow_batch(tree: TreeSpec, caps: np.ndarray) -> np.ndarray:
    """Flows for a (trials, edges) capacity matrix, one value per row."""
    flat = _flatten(tree)
    caps = np.asarray(caps, dtype=np.float64)
    if caps.ndim != 2 or caps.shape[1] != flat.means.shape[0]:
        raise ValueError(f"expected (trials, {flat.means.shape[0]}) capacities")
    flow = np.empty_like(caps)
    for e in flat.postorder:
        kids = flat.children[e]
        if not kids:
            flow[:, e] = caps[:, e]
        else:
            acc = flow[:, kids[0]].copy()
            for c in kids[1:]:
                acc += flow[:, c]
            flow[:, e] = np.minimum(caps[:, e], acc)
    out = flow[:, flat.roots[0]].copy()
    for rdx in flat.roots[1:]:
        out += flow[:, rdx]
    return out


def min_cut_capacity(tree: TreeSpec, caps: np.ndarray) -> float:
    """Minimum, over all root-to-leaf cuts, of the cut's total capacity.

    Exhaustive over edge subsets; the independent cross-check for max_flow.
    Refuses trees with more than 20 edges.
    """
    flat = _flatten(tree)
    caps = np.asarray(caps, dtype=np.float64)
    n = flat.means.shape[0]
    if n > 20:
        raise ValueError(f"cut enumeration capped at 20 edges, tree has {n}")
    # Bitmask of the root path for every leaf edge.
    paths: list[int] = []

    def walk(e: int, above: int) -> None:
        here = above | (1 << e)
        if not flat.children[e]:
            paths.append(here)
        for c in flat.children[e]:
            walk(c, here)

    for rdx in flat.roots:
        walk(rdx, 0)
    best = math.inf
    for subset in range(1, 1 << n):
        if all(subset & pm for pm in paths):
            total = 0.0
            for e in range(n):
                if subset & (1 << e):
                    total += caps[e]
            best = min(best, total)
    return best


def _edge_key(seed: int, edge: int) -> int:
    return derive_key(seed, Stream.TREE, edge)


def sample_capacities(tree: TreeSpec, seed: int, trial: int = 0) -> np.ndarray:
    means = edge_means(tree)
    out = np.empty_like(means)
    for e, m in enumerate(means):
        out[e] = exponentials(_edge_key(seed, e), 1, m, start=trial)[0]
    return out


def sample_capacities_batch(tree: TreeSpec, seed: int, trials: int) -> np.ndarray:
    means = edge_means(tree)
    out = np.empty((trials, means.shape[0]), dtype=np.float64)
    for e, m in enumerate(means):
        out[:, e] = exponentials(_edge_key(seed, e), trials, m)
    return out


@dataclass(frozen=True)
class FlowSandwichReport:
    conductance: float
    flow_mean: float
    flow_se: float
    trials: int
    passed_lower: bool
    passed_upper: bool

    @property
    def passed(self) -> bool:
        return self.passed_lower and self.passed_upper

    def to_json_dict(self) -> dict:
        return {
            "conductance": self.conductance,
            "flow_mean": self.flow_mean,
            "flow_se": self.flow_se,
            "trials": self.trials,
            "passed_lower": self.passed_lower,
            "passed_upper": self.passed_upper,
            "passed": self.passed,
        }


def verify_flow_sandwich(tree: TreeSpec, trials: int, seed: int) -> FlowSandwichReport:
    """Monte Carlo check of C <= E[F] <= 2C at four standard errors."""
    if trials < 2:
        raise ValueError("need at least two trials")
    flows = max_flow_batch(tree, sample_capacities_batch(tree, seed, trials))
    mean = float(flows.mean())
    se = float(flows.std(ddof=1) / math.sqrt(trials))
    c = effective_conductance(tree)
    return FlowSandwichReport(
        conductance=c,
        flow_mean=mean,
        flow_se=se,
        trials=trials,
        passed_lower=mean >= c - 4.0 * se,
        passed_upper=mean <= 2.0 * c + 4.0 * se,
    )


def random_tree(
    seed: int,
    index: int,
    max_depth: int = 6,
    max_children: int = 3,
    mean_range: tuple[float, float] = (0.1, 10.0),
) -> TreeSpec:
    """Deterministic corpus tree: branching thins with depth, capacity means
    are log-uniform over mean_range."""
    key = derive_key(seed, Stream.GENERIC, index)
    counter = [0]

    def draw() -> float:
        u = uniforms(key, 1, start=counter[0])[0]
        counter[0] += 1
        return float(u)

    lo, hi = math.log(mean_range[0]), math.log(mean_range[1])

    def build(depth: int) -> TreeNode:
        mean = math.exp(lo + draw() * (hi - lo))
        if depth >= max_depth:
            return TreeNode(mean=mean)
        # Leaf chance rises with depth so trees stay modest.
        n_kids = int(draw() * (max_children + 1))
        if depth > 1 and draw() < 0.25 * depth:
            n_kids = 0
        kids = tuple(build(depth + 1) for _ in range(n_kids))
        return TreeNode(mean=mean, children=kids)

    n_root = 1 + int(draw() * max_children)
    return TreeSpec(children=tuple(build(1) for _ in range(n_root)))


# -- truncation by an independent exponential ---------------------------------


@dataclass(frozen=True)
class ZDist:
    """Nonnegative distributions accepted by the truncation checker."""

    kind: str
    a: float = 0.0
    b: float = 0.0
    values: tuple[float, ...] = field(default=())

    @staticmethod
    def point(z: float) -> "ZDist":
        if not (z >= 0.0 and math.isfinite(z)):
            raise ValueError(f"point mass must be >= 0, got {z}")
        return ZDist(kind="point", a=float(z))

    @staticmethod
    def exponential(mean: float) -> "ZDist":
        if not (mean > 0.0 and math.isfinite(mean)):
            raise ValueError(f"exponential mean must be positive, got {mean}")
        return ZDist(kind="exponential", a=float(mean))

    @staticmethod
    def uniform(a: float, b: float) -> "ZDist":
        if not (0.0 <= a <= b) or not math.isfinite(b):
            raise ValueError(f"uniform needs 0 <= a <= b, got [{a}, {b}]")
        return ZDist(kind="uniform", a=float(a), b=float(b))

    @staticmethod
    def empirical(values) -> "ZDist":
        vals = tuple(float(v) for v in values)
        if not vals or any(v < 0.0 or not math.isfinite(v) for v in vals):
            raise ValueError("empirical values must be nonempty and >= 0")
        return ZDist(kind="empirical", values=vals)

    def mean(self) -> float:
        if self.kind == "point":
            return self.a
        if self.kind == "exponential":
            return self.a
        if self.kind == "uniform":
            return 0.5 * (self.a + self.b)
        return float(np.mean(self.values))

    def sample(self, seed: int, trials: int) -> np.ndarray:
        key = derive_key(seed, Stream.LEMMA_Z)
        if self.kind == "point":
            return np.full(trials, self.a)
        if self.kind == "exponential":
            return exponentials(key, trials, self.a)
        u = uniforms(key, trials)
        if self.kind == "uniform":
            return self.a + (self.b - self.a) * u
        vals = np.asarray(self.values)
        return vals[(u * len(vals)).astype(np.int64)]

    def label(self) -> str:
        if self.kind == "point":
            return f"point:{self.a!r}"
        if self.kind == "exponential":
            return f"exp:{self.a!r}"
        if self.kind == "uniform":
            return f"uniform:{self.a!r},{self.b!r}"
        return "empirical:" + ",".join(repr(v) for v in self.values)


def parse_zdist(text: str) -> ZDist:
    head, sep, rest = text.strip().partition(":")
    if not sep:
        raise ValueError(f"cannot parse distribution {text!r}")
    try:
        if head == "point":
            return ZDist.point(float(rest))
        if head == "exp":
            return ZDist.exponential(float(rest))
        if head == "uniform":
            a_s, _, b_s = rest.partition(",")
            return ZDist.uniform(float(a_s), float(b_s))
        if head == "empirical":
            return ZDist.empirical(float(v) for v in rest.split(","))
    except ValueError as exc:
        raise ValueError(f"cannot parse distribution {text!r}: {exc}") from exc
    raise ValueError(f"unknown distribution kind {head!r}")


def min_exp_closed_form(z: float, theta: float) -> float:
    """E[min(z, Y)] for constant z and Y ~ Exponential(rate theta)."""
    return -math.expm1(-theta * z) / theta


def truncation_rhs(mean_z: float, theta: float) -> float:
    return 2.0 * mean_z / (2.0 + theta * mean_z)


@dataclass(frozen=True)
class TruncationReport:
    zdist: str
    theta: float
    trials: int
    lhs: float
    lhs_se: float
    rhs: float
    passed: bool

    def to_json_dict(self) -> dict:
        return {
            "zdist": self.zdist,
            "theta": self.theta,
            "trials": self.trials,
            "lhs": self.lhs,
            "lhs_se": self.lhs_se,
            "rhs": self.rhs,
            "passed": self.passed,
        }


def check_truncation_bound(
    zdist: ZDist, theta: float, trials: int, seed: int
) -> TruncationReport:
    """Check E[min(Z, Y)] <= 2 E[Z] / (2 + theta E[Z]) with Y ~ Exp(rate theta).

    Point masses use the closed form on both sides (zero standard error);
    everything else estimates the left side by Monte Carlo and passes at
    four standard errors of slack.
    """
    if not (theta > 0.0 and math.isfinite(theta)):
        raise ValueError(f"theta must be positive, got {theta}")
    rhs = truncation_rhs(zdist.mean(), theta)
    if zdist.kind == "point":
        lhs = min_exp_closed_form(zdist.a, theta)
        return TruncationReport(zdist.label(), theta, 0, lhs, 0.0, rhs, lhs <= rhs)
    z = zdist.sample(seed, trials)
    y = exponentials(derive_key(seed, Stream.LEMMA_Y), trials, 1.0 / theta)
    m = np.minimum(z, y)
    lhs = float(m.mean())
    se = float(m.std(ddof=1) / math.sqrt(trials))
    return TruncationReport(
        zdist.label(), theta, trials, lhs, se, rhs, lhs <= rhs + 4.0 * se
    )
