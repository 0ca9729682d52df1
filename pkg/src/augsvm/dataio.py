"""Data and model files, plus the contiguous sharding used by the runtime.

Feature files are libsvm text: `label idx:val idx:val ...`, indices 1-based
and strictly ascending per line. Model files are the `augsvm-model 1` text
format; floats are written with 17 significant digits so a save/load round
trip reproduces every value bit for bit.
"""

from __future__ import annotations

import dataclasses
import io

import numpy as np
import scipy.sparse as sp

from .errors import DataError
from .types import Dataset, KernelSpec, Model, Solver, Task

# shards at or under this many dense elements keep a dense copy of their
# rows so the Gram-free stat phase can run through BLAS
DENSE_CACHE_ELEMENTS = 4_000_000


def fmt(v: float) -> str:
    """17 significant digits: enough to round-trip any float64 exactly."""
    return f"{float(v):.17g}"


def _parse_label(token: str, task: Task, line_no: int) -> float:
    try:
        raw = float(token)
    except ValueError:
        raise DataError(f"line {line_no}: bad label {token!r}") from None
    if not np.isfinite(raw):
        raise DataError(f"line {line_no}: non-finite label")
    if task is Task.CLS:
        # accept the common 0/1 encoding alongside -1/+1
        if raw in (1.0,):
            return 1.0
        if raw in (-1.0, 0.0):
            return -1.0
        raise DataError(f"line {line_no}: cls label must be -1, 0 or +1, got {token}")
    if task is Task.MLT:
        if raw < 1 or raw != int(raw):
            raise DataError(f"line {line_no}: mlt label must be a positive integer")
        return float(int(raw))
    return raw


def _parse_features(tokens, line_no: int):
    """Returns (indices 0-based ascending, values) with explicit zeros dropped."""
    idx, val = [], []
    last = 0
    for tok in tokens:
        pair = tok.split(":")
        if len(pair) != 2:
            raise DataError(f"line {line_no}: malformed feature token {tok!r}")
        try:
            i = int(pair[0])
            v = float(pair[1])
        except ValueError:
            raise DataError(f"line {line_no}: malformed feature token {tok!r}") from None
        if i < 1:
            raise DataError(f"line {line_no}: feature index must be >= 1, got {i}")
        if i <= last:
            raise DataError(f"line {line_no}: indices must be strictly ascending")
        last = i
        if not np.isfinite(v):
            raise DataError(f"line {line_no}: non-finite value at index {i}")
        if v == 0.0:
            continue
        idx.append(i - 1)
        val.append(v)
    return idx, val


def _parse_chunk(chunk_lines, task: Task, first_line_no: int):
    labels: list[float] = []
    row_idx: list[list[int]] = []
    row_val: list[list[float]] = []
    max_idx = 0  # 1-based
    for line_no, line in enumerate(chunk_lines, start=first_line_no):
        parts = line.split()
        if not parts:
            continue
        labels.append(_parse_label(parts[0], task, line_no))
        idx, val = _parse_features(parts[1:], line_no)
        if idx:
            max_idx = max(max_idx, idx[-1] + 1)
        row_idx.append(idx)
        row_val.append(val)
    return labels, row_idx, row_val, max_idx


def parse_libsvm(lines, task: Task, add_bias: bool = True,
                 dim: int | None = None,
                 num_classes: int | None = None,
                 parse_workers: int = 0) -> Dataset:
    """Parse libsvm-format text into a Dataset.

    `lines` is any iterable of strings (an open file works). `dim` pins the
    raw feature count; otherwise it is the largest index seen. When
    `add_bias` is set a constant column with value 1.0 is appended after the
    raw features, so the final dim is one larger. For mlt, `num_classes`
    pins M (labels above it are rejected); otherwise M is the largest label.

    `parse_workers` >= 2 splits the lines into that many chunks parsed on a
    thread pool (default off; identical output either way).
    """
    task = Task(task)
    if parse_workers >= 2:
        all_lines = list(lines)
        size = max(1, -(-len(all_lines) // parse_workers))
        chunks = [(all_lines[i:i + size], i + 1)
                  for i in range(0, len(all_lines), size)]
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=parse_workers) as ex:
            parts = list(ex.map(lambda c: _parse_chunk(c[0], task, c[1]), chunks))
        labels = [v for p in parts for v in p[0]]
        row_idx = [v for p in parts for v in p[1]]
        row_val = [v for p in parts for v in p[2]]
        max_idx = max((p[3] for p in parts), default=0)
    else:
        labels, row_idx, row_val, max_idx = _parse_chunk(lines, task, 1)
    if not labels:
        raise DataError("no data rows")
    if dim is not None:
        if dim < max_idx:
            raise DataError(f"declared dim {dim} below largest index {max_idx}")
        raw_dim = dim
    else:
        raw_dim = max_idx
    if raw_dim == 0 and not add_bias:
        raise DataError("no features seen and no dim declared")
    full_dim = raw_dim + (1 if add_bias else 0)

    indptr = np.zeros(len(labels) + 1, dtype=np.int64)
    for i, idx in enumerate(row_idx):
        indptr[i + 1] = indptr[i] + len(idx) + (1 if add_bias else 0)
    indices = np.empty(indptr[-1], dtype=np.int64)
    data = np.empty(indptr[-1], dtype=np.float64)
    for i, (idx, val) in enumerate(zip(row_idx, row_val)):
        lo = indptr[i]
        indices[lo:lo + len(idx)] = idx
        data[lo:lo + len(idx)] = val
        if add_bias:
            indices[indptr[i + 1] - 1] = raw_dim
            data[indptr[i + 1] - 1] = 1.0
    mat = sp.csr_matrix((data, indices, indptr), shape=(len(labels), full_dim))

    m = num_classes
    if task is Task.MLT and m is None:
        m = int(max(labels))
        if m < 2:
            raise DataError("mlt data must contain at least two classes")
    return Dataset(matrix=mat, labels=np.asarray(labels), task=task,
                   has_bias=add_bias, num_classes=m)


def load_libsvm(path, task: Task, **kwargs) -> Dataset:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_libsvm(fh, task, **kwargs)


def _label_str(v: float, task: Task) -> str:
    if task is Task.CLS:
        return "+1" if v > 0 else "-1"
    if task is Task.MLT:
        return str(int(v))
    return fmt(v)


def serialize_libsvm(data: Dataset, fh, strip_bias: bool = True):
    """Write the dataset back out. By default the synthetic bias column is
    dropped so parse(serialize(ds)) with the same add_bias flag restores ds."""
    drop_col = data.dim - 1 if (strip_bias and data.has_bias) else -1
    for d in range(data.n):
        row = data.row(d)
        feats = " ".join(
            f"{i + 1}:{fmt(v)}" for i, v in zip(row.indices, row.values)
            if i != drop_col)
        line = _label_str(data.labels[d], data.task)
        fh.write(line + (" " + feats if feats else "") + "\n")


def dumps_libsvm(data: Dataset, strip_bias: bool = True) -> str:
    buf = io.StringIO()
    serialize_libsvm(data, buf, strip_bias=strip_bias)
    return buf.getvalue()


# ---------------------------------------------------------------------------
# sharding

@dataclasses.dataclass
class Shard:
    """A contiguous block of rows owned by one worker.

    Small shards keep a dense copy so per-iteration stat kernels run through
    BLAS; large or very wide shards stay sparse. Both paths compute the same
    quantities (tests compare them against a per-datum oracle).
    """

    rank: int
    lo: int
    hi: int
    matrix: sp.csr_matrix
    labels: np.ndarray
    dense: np.ndarray | None

    @property
    def n(self) -> int:
        return self.hi - self.lo

    def margins(self, w: np.ndarray) -> np.ndarray:
        if self.dense is not None:
            return self.dense @ w
        return self.matrix @ w


def stripe_ranges(n: int, workers: int) -> list[tuple[int, int]]:
    """Contiguous [lo, hi) ranges: the first n mod P get ceil(n/P) rows, the
    rest floor(n/P)."""
    if workers < 1:
        raise ValueError("workers must be >= 1")
    if workers > n:
        raise ValueError(f"workers ({workers}) exceed row count ({n})")
    base, extra = divmod(n, workers)
    ranges = []
    lo = 0
    for rank in range(workers):
        hi = lo + base + (1 if rank < extra else 0)
        ranges.append((lo, hi))
        lo = hi
    return ranges


def partition(data: Dataset, workers: int,
              dense_cache_elements: int = DENSE_CACHE_ELEMENTS) -> list[Shard]:
    """Split rows into `workers` contiguous shards. The first n mod P shards
    take ceil(n/P) rows, the rest floor(n/P); order is preserved."""
    shards = []
    for rank, (lo, hi) in enumerate(stripe_ranges(data.n, workers)):
        size = hi - lo
        block = data.matrix[lo:hi]
        dense = None
        if size * data.dim <= dense_cache_elements:
            dense = block.toarray()
        shards.append(Shard(rank=rank, lo=lo, hi=hi, matrix=block,
                            labels=data.labels[lo:hi], dense=dense))
    return shards


# ---------------------------------------------------------------------------
# model files

def save_model(model: Model) -> str:
    out = ["augsvm-model 1",
           f"task {model.task.value}",
           f"solver {model.solver.value}",
           f"lambda {fmt(model.lam)}",
           f"epsilon {fmt(model.epsilon)}",
           f"bias {1 if model.has_bias else 0}",
           f"dim {model.dim}"]
    if model.task is Task.MLT:
        out.append(f"classes {model.num_classes}")
        for row in model.weights:
            out.append("w " + " ".join(fmt(v) for v in row))
    elif model.solver is Solver.KRN:
        out.append(f"kernel {model.kernel.kind} {fmt(model.kernel.sigma)}")
        out.append("omega " + " ".join(fmt(v) for v in model.omega))
        sv_text = dumps_libsvm(model.support, strip_bias=False)
        for line in sv_text.splitlines():
            out.append("sv " + line)
    else:
        out.append("w " + " ".join(fmt(v) for v in model.weights))
    return "\n".join(out) + "\n"


def _expect(line: str | None, key: str):
    if line is None:
        raise DataError(f"model file truncated, expected {key}")
    parts = line.split()
    if not parts or parts[0] != key:
        raise DataError(f"model file: expected {key!r} line, got {line!r}")
    return parts[1:]


def _floats(tokens, what: str) -> np.ndarray:
    try:
        arr = np.array([float(t) for t in tokens], dtype=np.float64)
    except ValueError:
        raise DataError(f"model file: bad float in {what}") from None
    return arr


def load_model(text: str) -> Model:
    lines = iter(text.splitlines())

    def nxt():
        return next(lines, None)

    first = nxt()
    if first is None or first.strip() != "augsvm-model 1":
        raise DataError("not an augsvm-model version 1 file")
    task_tok = _expect(nxt(), "task")
    try:
        task = Task(task_tok[0])
    except (ValueError, IndexError):
        raise DataError(f"model file: unknown task {task_tok}") from None
    solver_tok = _expect(nxt(), "solver")
    try:
        solver = Solver(solver_tok[0])
    except (ValueError, IndexError):
        raise DataError(f"model file: unknown solver {solver_tok}") from None
    lam = float(_floats(_expect(nxt(), "lambda"), "lambda")[0])
    epsilon = float(_floats(_expect(nxt(), "epsilon"), "epsilon")[0])
    bias_tok = _expect(nxt(), "bias")
    if bias_tok != ["0"] and bias_tok != ["1"]:
        raise DataError("model file: bias must be 0 or 1")
    has_bias = bias_tok == ["1"]
    dim = int(_expect(nxt(), "dim")[0])
    if dim < 1:
        raise DataError("model file: dim must be >= 1")

    if task is Task.MLT:
        if solver is not Solver.LIN:
            raise DataError("model file: mlt requires the lin solver")
        m = int(_expect(nxt(), "classes")[0])
        if m < 2:
            raise DataError("model file: classes must be >= 2")
        rows = []
        for _ in range(m):
            vals = _floats(_expect(nxt(), "w"), "w")
            if vals.size != dim:
                raise DataError(f"model file: w length {vals.size} != dim {dim}")
            rows.append(vals)
        return Model(task=task, solver=solver, lam=lam, epsilon=epsilon,
                     has_bias=has_bias, dim=dim, weights=np.stack(rows),
                     num_classes=m)

    if solver is Solver.KRN:
        if task is not Task.CLS:
            raise DataError("model file: kernel solver is classification-only")
        ker = _expect(nxt(), "kernel")
        if len(ker) != 2 or ker[0] != "gaussian":
            raise DataError(f"model file: unsupported kernel {ker}")
        spec = KernelSpec(kind="gaussian", sigma=float(_floats(ker[1:], "kernel")[0]))
        omega = _floats(_expect(nxt(), "omega"), "omega")
        sv_lines = []
        for _ in range(omega.size):
            line = nxt()
            if line is None:
                raise DataError("model file: fewer sv lines than omega entries")
            if not line.startswith("sv "):
                raise DataError(f"model file: expected sv line, got {line!r}")
            sv_lines.append(line[3:])
        support = parse_libsvm(sv_lines, Task.CLS, add_bias=False, dim=dim)
        if has_bias:
            # stored sv rows embed the bias column explicitly
            support = Dataset(matrix=support.matrix, labels=support.labels,
                              task=Task.CLS, has_bias=True)
        return Model(task=task, solver=solver, lam=lam, epsilon=epsilon,
                     has_bias=has_bias, dim=dim, omega=omega, support=support,
                     kernel=spec)

    vals = _floats(_expect(nxt(), "w"), "w")
    if vals.size != dim:
        raise DataError(f"model file: w length {vals.size} != dim {dim}")
    return Model(task=task, solver=solver, lam=lam, epsilon=epsilon,
                 has_bias=has_bias, dim=dim, weights=vals)


def save_model_file(model: Model, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(save_model(model))


def load_model_file(path) -> Model:
    with open(path, "r", encoding="utf-8") as fh:
        return load_model(fh.read())
