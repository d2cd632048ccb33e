"""Symmetric-subspace randomized benchmarking with a fixed 1/3 asymptote.

The symmetric subspace of two qubits is spanned by ``|dd>``, ``(|du> + |ud>)/sqrt 2``
and ``|uu>`` (index 0, 1, 2), embedded into the four-dimensional qubit space by
:data:`SYM`.  Native operations are global microwave rotations ``R_phi(theta)``
applied to both ions and the light-shift gate ``diag(1, i, i, 1)``, which acts
on the subspace as ``diag(1, i, 1)``.

Clifford elements are compiled into alternating words
``B_k T B_{k-1} ... T B_0``, where each block ``B`` is the product of two global
equatorial rotations and ``T`` is the light-shift gate.  The rotation angles are
continuous: a word of ``k`` light-shift gates has ``4(k + 1)`` angles, and a
least-squares fit to the target (up to phase) finds them.  The shipped catalog
holds the fit with the fewest light-shift gates that was found for every element.

Depolarizing conventions
------------------------
A qutrit depolarizing channel of strength ``lam`` maps
``rho -> lam rho + (1 - lam) tr(P rho) P/3`` with ``P`` the subspace projector.
Its average gate infidelity is ``eps = (2/3)(1 - lam)``.  Single-qubit pulses
are followed by the channel ``rho -> (1 - p) rho + p I/2`` on each qubit with
``p = 2 eps_1q``.  Return probabilities decay as ``1/3 + A p^L`` and the
Clifford average fidelity is ``F = p + (1 - p)/3``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources

import numpy as np
from scipy.optimize import brentq, curve_fit, least_squares

_S2 = math.sqrt(2.0)
SYM = np.array([[1, 0, 0], [0, 1 / _S2, 0], [0, 1 / _S2, 0], [0, 0, 1]], dtype=complex)
PROJ = SYM @ SYM.conj().T
LS_GATE = np.diag([1, 1j, 1j, 1]).astype(complex)
LS_GATE_SYM = SYM.conj().T @ LS_GATE @ SYM

_PX = np.array([[0, 1], [1, 0]], dtype=complex)
_PY = np.array([[0, -1j], [1j, 0]], dtype=complex)
_PZ = np.diag([1.0, -1.0]).astype(complex)


class CompilationError(RuntimeError):
    pass


class FitError(RuntimeError):
    def __init__(self, msg, residuals=None):
        super().__init__(msg)
        self.residuals = residuals


def rotation(theta: float, phi: float) -> np.ndarray:
    """Single-qubit rotation by ``theta`` about the equatorial axis at angle ``phi``."""
    n = math.cos(phi) * _PX + math.sin(phi) * _PY
    return math.cos(theta / 2) * np.eye(2) - 1j * math.sin(theta / 2) * n


def global_rotation(theta: float, phi: float) -> np.ndarray:
    r = rotation(theta, phi)
    return np.kron(r, r)


def to_sym(u4: np.ndarray) -> np.ndarray:
    return SYM.conj().T @ u4 @ SYM


def phase_distance(u: np.ndarray, v: np.ndarray) -> float:
    """Operator-norm distance between ``u`` and ``v`` minimised over a global phase."""
    ov = np.trace(v.conj().T @ u)
    ph = ov / abs(ov) if abs(ov) > 1e-12 else 1.0
    return float(np.linalg.norm(u - ph * v, 2))


# --- group ----------------------------------------------------------------


def _canonical(u: np.ndarray) -> np.ndarray:
    flat = u.ravel()
    i = int(np.argmax(np.abs(flat) > 1e-6))
    return u * (abs(flat[i]) / flat[i])


def _key(u: np.ndarray) -> tuple:
    f = np.round(_canonical(u).ravel(), 7) + 0.0
    return tuple(np.concatenate([f.real, f.imag]).tolist())


@lru_cache(maxsize=1)
def _group() -> tuple[np.ndarray, ...]:
    w = np.exp(2j * np.pi / 3)
    gens = [
        np.roll(np.eye(3), 1, axis=0).astype(complex),  # shift
        np.diag([1, w, w * w]),  # clock
        np.array([[w ** (j * k) for k in range(3)] for j in range(3)]) / math.sqrt(3),  # Fourier
        np.diag([1, 1, w]),  # phase
    ]
    seen = {_key(np.eye(3)): np.eye(3, dtype=complex)}
    frontier = [np.eye(3, dtype=complex)]
    while frontier:
        nxt = []
        for u in frontier:
            for g in gens:
                v = _canonical(g @ u)
                k = _key(v)
                if k not in seen:
                    seen[k] = v
                    nxt.append(v)
        frontier = nxt
    elems = tuple(seen.values())
    if len(elems) != 216:
        raise RuntimeError(f"Clifford closure produced {len(elems)} elements, expected 216")
    return elems


def clifford_group() -> list[np.ndarray]:
    """The 216 qutrit Clifford unitaries modulo phase, in a fixed breadth-first order.

    Element 0 is the identity.
    """
    return list(_group())


@lru_cache(maxsize=1)
def _group_stack() -> np.ndarray:
    return np.stack(_group())


def find_clifford(u: np.ndarray, tol: float = 1e-6) -> int:
    """Index of the group element equal to ``u`` up to phase."""
    ov = np.abs(np.einsum("kij,ij->k", _group_stack().conj(), u)) / 3
    i = int(np.argmax(ov))
    if ov[i] < 1 - tol:
        raise KeyError("matrix is not a qutrit Clifford")
    return i


# --- compilation ----------------------------------------------------------


@dataclass(frozen=True)
class NativeSequence:
    """Time-ordered native operations.

    Each op is ``("R", theta, phi)`` for a global rotation or ``("LS",)``.
    """

    ops: tuple

    @property
    def n_ls(self) -> int:
        return sum(op[0] == "LS" for op in self.ops)

    @property
    def n_1q(self) -> int:
        return sum(op[0] == "R" for op in self.ops)

    def unitary(self) -> np.ndarray:
        """Four-dimensional unitary of the sequence."""
        u = np.eye(4, dtype=complex)
        for op in self.ops:
            u = (LS_GATE if op[0] == "LS" else global_rotation(op[1], op[2])) @ u
        return u

    def sym_unitary(self) -> np.ndarray:
        return to_sym(self.unitary())

    def to_list(self) -> list:
        return [list(op) for op in self.ops]


def _spin1(theta, phi):
    return to_sym(global_rotation(theta, phi))


def _word(x: np.ndarray, k: int) -> np.ndarray:
    def block(p):
        return _spin1(p[0], p[1]) @ _spin1(p[2], p[3])

    u = block(x[0:4])
    for i in range(k):
        u = block(x[4 * (i + 1): 4 * (i + 2)]) @ LS_GATE_SYM @ u
    return u


def _residual(x, k, target):
    u = _word(x, k)
    ov = np.trace(target.conj().T @ u)
    ph = ov / abs(ov) if abs(ov) > 1e-12 else 1.0
    d = u - ph * target
    return np.concatenate([d.real.ravel(), d.imag.ravel()])


def _ops_from_angles(x: np.ndarray, k: int, tiny: float = 1e-12) -> tuple:
    ops = []
    for i in range(k + 1):
        if i:
            ops.append(("LS",))
        p = x[4 * i: 4 * (i + 1)]
        for theta, phi in ((p[2], p[3]), (p[0], p[1])):  # rightmost factor acts first
            if theta < 0:
                theta, phi = -theta, phi + math.pi
            theta = float(math.fmod(theta, 2 * math.pi))  # R(theta + 2 pi) = -R(theta); the pair is unchanged
            phi = float(math.fmod(phi, 2 * math.pi)) % (2 * math.pi)
            if min(theta, 2 * math.pi - theta) > tiny:
                ops.append(("R", theta, phi))
    return tuple(ops)


def compile_clifford(target: np.ndarray, max_ls: int = 3, restarts: int = 12, seed: int = 0,
                     tol: float = 1e-10) -> NativeSequence:
    """Native word for a symmetric-subspace unitary with as few light-shift gates as found.

    Word lengths ``k = 0, 1, ..., max_ls`` are tried in order, each from
    ``restarts`` random starting angles.

    Raises
    ------
    CompilationError
        No word with at most ``max_ls`` light-shift gates reproduced the target.
    """
    target = np.asarray(target, dtype=complex)
    if phase_distance(target, np.eye(3)) < tol:
        return NativeSequence(())
    rng = np.random.default_rng(seed)
    for k in range(max_ls + 1):
        for _ in range(restarts):
            x0 = rng.uniform(0, 2 * np.pi, 4 * (k + 1))
            r = least_squares(_residual, x0, args=(k, target), xtol=1e-15, ftol=1e-15, gtol=1e-15)
            if np.max(np.abs(r.fun)) > 1e-9:
                continue
            seq = NativeSequence(_ops_from_angles(r.x, k))
            if phase_distance(seq.sym_unitary(), target) < tol:
                return seq
    raise CompilationError(f"no native word with <= {max_ls} light-shift gates found")


def build_catalog(max_ls: int = 3, restarts: int = 12, seed: int = 0, progress=None) -> list[NativeSequence]:
    out = []
    for i, c in enumerate(clifford_group()):
        out.append(compile_clifford(c, max_ls, restarts, seed + i))
        if progress:
            progress(i, out[-1])
    return out


def save_catalog(catalog, path) -> None:
    doc = {"version": 1, "elements": [s.to_list() for s in catalog]}
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=0)


@lru_cache(maxsize=1)
def clifford_catalog() -> tuple[NativeSequence, ...]:
    """Precompiled native words for all 216 elements, in group order."""
    text = resources.files("lsgate").joinpath("data/clifford_catalog.json").read_text()
    doc = json.loads(text)
    return tuple(NativeSequence(tuple(tuple(op) for op in ops)) for ops in doc["elements"])


def catalog_stats(catalog=None) -> dict:
    catalog = clifford_catalog() if catalog is None else catalog
    n_ls = np.array([s.n_ls for s in catalog])
    n_1q = np.array([s.n_1q for s in catalog])
    return {
        "mean_n_ls": float(n_ls.mean()),
        "mean_n_1q": float(n_1q.mean()),
        "max_n_ls": int(n_ls.max()),
        "max_n_1q": int(n_1q.max()),
        "n_ls_histogram": {int(k): int((n_ls == k).sum()) for k in np.unique(n_ls)},
    }


# --- sequences ------------------------------------------------------------


def generate_sequence(length: int, seed: int) -> list[int]:
    """``length`` uniform random Clifford indices followed by the inverting element."""
    if length < 1:
        raise ValueError("sequence length must be >= 1")
    group = _group()
    idx = np.random.default_rng(seed).integers(len(group), size=length)
    total = np.eye(3, dtype=complex)
    for i in idx:
        total = group[i] @ total
    return [int(i) for i in idx] + [find_clifford(total.conj().T)]


def compose(indices) -> np.ndarray:
    group = _group()
    u = np.eye(3, dtype=complex)
    for i in indices:
        u = group[i] @ u
    return u


@dataclass(frozen=True)
class NoiseModel:
    """Error model for simulated benchmarking.

    Parameters
    ----------
    clifford_error : float
        Average infidelity of a qutrit depolarizing channel applied after
        every Clifford.  Used for synthetic data; ideal Cliffords are applied
        directly, without compiling.
    ls_error : float
        Qutrit depolarizing infidelity after each light-shift gate.
    single_qubit_error : float
        Average infidelity of each microwave pulse, modelled as independent
        depolarizing on both qubits.
    ls_kraus : tuple of (4, 4) arrays, optional
        Replaces the light-shift gate by this (possibly trace-decreasing)
        channel, e.g. a simulated gate process.
    """

    clifford_error: float = 0.0
    ls_error: float = 0.0
    single_qubit_error: float = 0.0
    ls_kraus: tuple | None = None

    @property
    def gate_level(self) -> bool:
        return bool(self.ls_error or self.single_qubit_error or self.ls_kraus is not None)

    def describe(self) -> dict:
        return {
            "clifford_error": self.clifford_error,
            "ls_error": self.ls_error,
            "single_qubit_error": self.single_qubit_error,
            "ls_channel": "kraus" if self.ls_kraus is not None else "ideal",
        }


def _sym_depolarize(rho, eps):
    lam = 1 - 1.5 * eps
    return lam * rho + (1 - lam) * np.trace(PROJ @ rho).real * PROJ / 3


def _qubit_depolarize(rho, p):
    if p == 0:
        return rho
    r = rho.reshape(2, 2, 2, 2)
    # qubit 1
    tr1 = np.einsum("aiaj->ij", r)
    r = (1 - p) * r + p / 2 * np.einsum("ab,ij->aibj", np.eye(2), tr1)
    tr2 = np.einsum("iaja->ij", r)
    r = (1 - p) * r + p / 2 * np.einsum("ij,ab->iajb", tr2, np.eye(2))
    return r.reshape(4, 4)


def _apply_native(rho, seq: NativeSequence, noise: NoiseModel):
    p1 = 2 * noise.single_qubit_error
    for op in seq.ops:
        if op[0] == "R":
            u = global_rotation(op[1], op[2])
            rho = _qubit_depolarize(u @ rho @ u.conj().T, p1)
        elif noise.ls_kraus is not None:
            rho = sum(k @ rho @ k.conj().T for k in noise.ls_kraus)
        else:
            rho = LS_GATE @ rho @ LS_GATE.conj().T
            if noise.ls_error:
                rho = _sym_depolarize(rho, noise.ls_error)
    return rho


def sequence_survival(indices, noise: NoiseModel, catalog=None) -> float:
    """Probability of returning to ``|dd>`` after the Clifford sequence."""
    if not noise.gate_level:
        group = _group()
        rho = np.zeros((3, 3), dtype=complex)
        rho[0, 0] = 1
        lam = 1 - 1.5 * noise.clifford_error
        for i in indices:
            u = group[i]
            rho = lam * (u @ rho @ u.conj().T) + (1 - lam) * np.trace(rho).real * np.eye(3) / 3
        return float(np.clip(rho[0, 0].real, 0, 1))
    catalog = clifford_catalog() if catalog is None else catalog
    rho = np.zeros((4, 4), dtype=complex)
    rho[0, 0] = 1
    for i in indices:
        rho = _apply_native(rho, catalog[i], noise)
        if noise.clifford_error:
            rho = _sym_depolarize(rho, noise.clifford_error)
    return float(np.clip(rho[0, 0].real, 0, 1))


@dataclass
class SRBDataset:
    lengths: list[int]
    records: list[dict]  # length, seed, shots, survival
    metadata: dict = field(default_factory=dict)

    def mean_survival(self) -> dict[int, float]:
        return {L: float(np.mean([r["survival"] for r in self.records if r["length"] == L])) for L in self.lengths}

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("length,seed,shots,survival\n")
            for r in self.records:
                fh.write(f"{r['length']},{r['seed']},{r['shots']},{r['survival']!r}\n")

    @classmethod
    def from_csv(cls, path, metadata=None) -> "SRBDataset":
        import csv

        with open(path) as fh:
            rows = [
                {"length": int(r["length"]), "seed": int(r["seed"]), "shots": int(r["shots"]),
                 "survival": float(r["survival"])}
                for r in csv.DictReader(fh)
            ]
        lengths = sorted({r["length"] for r in rows})
        return cls(lengths, rows, metadata or {})


def sequence_seed(master: int, length_index: int, sequence_index: int) -> int:
    """Seed of one sequence, split deterministically from the master seed."""
    ss = np.random.SeedSequence(master, spawn_key=(length_index, sequence_index))
    return int(ss.generate_state(1, dtype=np.uint32)[0])


def run_srb(noise: NoiseModel = NoiseModel(), lengths=(1, 3, 7), n_seq: int = 33, shots: int = 0,
            seed: int = 0, catalog=None) -> SRBDataset:
    """Simulate a benchmarking dataset.

    With ``shots == 0`` the exact return probability is recorded, otherwise a
    binomial estimate from ``shots`` repetitions.
    """
    if noise.ls_kraus is not None:
        for k in noise.ls_kraus:
            if np.shape(k) != (4, 4):
                raise ValueError("light-shift Kraus operators must be 4x4 on the qubit space")
    lengths = [int(L) for L in lengths]
    shot_rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(2**31,)))
    records = []
    for li, L in enumerate(lengths):
        for si in range(n_seq):
            s = sequence_seed(seed, li, si)
            p = sequence_survival(generate_sequence(L, s), noise, catalog)
            surv = p if shots == 0 else shot_rng.binomial(shots, p) / shots
            records.append({"length": L, "seed": s, "shots": shots, "survival": float(surv)})
    meta = {"noise": noise.describe(), "n_seq": n_seq, "master_seed": seed}
    return SRBDataset(lengths, records, meta)


# --- fitting --------------------------------------------------------------


@dataclass(frozen=True)
class SRBFit:
    p: float
    amplitude: float
    asymptote: float
    fidelity: float
    fidelity_err: float
    p_err: float
    fixed_asymptote: bool
    ls_fidelity: float | None = None
    ls_fidelity_err: float | None = None
    n_ls: float | None = None
    n_1q: float | None = None
    single_qubit_error: float | None = None

    @property
    def error(self) -> float:
        return 1 - self.fidelity

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def clifford_fidelity(p: float, d: int = 3) -> float:
    return p + (1 - p) / d


def fit_srb(data: SRBDataset, fixed_asymptote: bool = True, single_qubit_error: float | None = None,
            n_ls: float | None = None, n_1q: float | None = None) -> SRBFit:
    """Fit ``survival = B + A p^L`` with ``B = 1/3`` (default) or free.

    Per-length means are fitted, weighted by their standard errors when the
    data carry sampling noise.  With ``single_qubit_error`` given the
    light-shift gate fidelity is extracted by counting:
    ``eps_LS = (eps_C - n_1q eps_1q) / n_LS`` with catalog-mean counts.
    """
    if len(data.lengths) < 2:
        raise FitError("need at least two distinct sequence lengths")
    L = np.array(data.lengths, dtype=float)
    groups = [np.array([r["survival"] for r in data.records if r["length"] == n]) for n in data.lengths]
    y = np.array([g.mean() for g in groups])
    se = np.array([g.std(ddof=1) / math.sqrt(len(g)) if len(g) > 1 else 0.0 for g in groups])
    sigma = np.maximum(se, 1e-6) if np.any(se > 0) else None

    p0 = max(min((y[-1] - 1 / 3) / max(y[0] - 1 / 3, 1e-9), 1.0), 1e-3) ** (1 / max(L[-1] - L[0], 1))
    try:
        if fixed_asymptote:
            f = lambda x, a, p: 1 / 3 + a * p**x  # noqa: E731
            popt, pcov = curve_fit(f, L, y, p0=[2 / 3, p0], sigma=sigma, absolute_sigma=sigma is not None,
                                   bounds=([0, 0], [1, 1.0]), xtol=1e-15, ftol=1e-15, gtol=1e-15)
            a, p = popt
            b = 1 / 3
        else:
            f = lambda x, a, p, b: b + a * p**x  # noqa: E731
            popt, pcov = curve_fit(f, L, y, p0=[2 / 3, p0, 1 / 3], sigma=sigma, absolute_sigma=sigma is not None,
                                   bounds=([0, 0, 0], [1, 1.0, 1]), xtol=1e-15, ftol=1e-15, gtol=1e-15,
                                   max_nfev=20000)
            a, p, b = popt
    except (RuntimeError, ValueError) as exc:
        raise FitError(f"fit did not converge: {exc}", y) from exc
    if not 0 < p <= 1:
        raise FitError(f"decay parameter {p} outside (0, 1]", y - f(L, *popt))
    perr = float(np.sqrt(pcov[1, 1])) if np.all(np.isfinite(pcov)) else float("nan")
    fid = clifford_fidelity(p)
    out = dict(p=float(p), amplitude=float(a), asymptote=float(b), fidelity=float(fid),
               fidelity_err=2 / 3 * perr, p_err=perr, fixed_asymptote=fixed_asymptote)
    if single_qubit_error is not None:
        if n_ls is None or n_1q is None:
            stats = catalog_stats()
            n_ls = stats["mean_n_ls"] if n_ls is None else n_ls
            n_1q = stats["mean_n_1q"] if n_1q is None else n_1q
        eps_ls = (1 - fid - n_1q * single_qubit_error) / n_ls
        out.update(ls_fidelity=1 - eps_ls, ls_fidelity_err=2 / 3 * perr / n_ls, n_ls=n_ls, n_1q=n_1q,
                   single_qubit_error=single_qubit_error)
    return SRBFit(**out)


# --- gap benchmarking -----------------------------------------------------


def gap_sequence(indices, catalog=None) -> NativeSequence:
    """Native sequence with all light-shift gates removed plus a microwave-only inverse.

    The last index (the SRB inverter) is dropped; the remaining rotations
    multiply to a single global rotation whose inverse is appended as two
    equatorial pulses.
    """
    catalog = clifford_catalog() if catalog is None else catalog
    ops = [op for i in indices[:-1] for op in catalog[i].ops if op[0] == "R"]
    u = np.eye(2, dtype=complex)
    for op in ops:
        u = rotation(op[1], op[2]) @ u
    return NativeSequence(tuple(ops) + _equatorial_pair(u.conj().T))


def _equatorial_pair(u: np.ndarray) -> tuple:
    """Two equatorial rotations whose product equals the SU(2) matrix ``u`` up to sign."""
    u = u / np.sqrt(np.linalg.det(u))

    def res(x):
        v = rotation(x[0], x[1]) @ rotation(x[2], x[3])
        ov = np.trace(u.conj().T @ v)
        d = v - (ov / abs(ov) if abs(ov) > 1e-12 else 1) * u
        return np.concatenate([d.real.ravel(), d.imag.ravel()])

    rng = np.random.default_rng(0)
    for _ in range(20):
        r = least_squares(res, rng.uniform(0, 2 * np.pi, 4), xtol=1e-15, ftol=1e-15, gtol=1e-15)
        if np.max(np.abs(r.fun)) < 1e-10:
            return (("R", float(r.x[2] % (4 * np.pi)), float(r.x[3] % (2 * np.pi))),
                    ("R", float(r.x[0] % (4 * np.pi)), float(r.x[1] % (2 * np.pi))))
    raise CompilationError("equatorial decomposition failed")


def gap_survival(single_qubit_error: float, lengths, n_seq: int = 33, seed: int = 0, catalog=None) -> dict[int, float]:
    """Mean predicted gap-benchmarking survival per length under single-qubit depolarizing."""
    noise = NoiseModel(single_qubit_error=single_qubit_error)
    out = {}
    for li, L in enumerate(lengths):
        vals = []
        for si in range(n_seq):
            seq = gap_sequence(generate_sequence(L, sequence_seed(seed, li, si)), catalog)
            rho = np.zeros((4, 4), dtype=complex)
            rho[0, 0] = 1
            rho = _apply_native(rho, seq, noise)
            vals.append(rho[0, 0].real)
        out[int(L)] = float(np.mean(vals))
    return out


def gap_benchmark(single_qubit_error: float | None = None, lengths=(10, 65), n_seq: int = 33, seed: int = 0,
                  calibrate_to: tuple[int, float] | None = None) -> dict:
    """Expected gap-benchmarking survivals.

    Either ``single_qubit_error`` is given, or ``calibrate_to = (L, survival)``
    fixes it by matching the prediction at that length.
    """
    if calibrate_to is not None:
        Lc, sc = calibrate_to
        single_qubit_error = brentq(lambda e: gap_survival(e, [Lc], n_seq, seed)[Lc] - sc, 0.0, 0.05, xtol=1e-12)
    if single_qubit_error is None:
        raise ValueError("give single_qubit_error or calibrate_to")
    return {"single_qubit_error": single_qubit_error,
            "survival": gap_survival(single_qubit_error, lengths, n_seq, seed)}
