"""Two-point POVM protocol and linear reconstruction of the quasi-probability table.

First-measurement elements, for every eigenvector ``psi_mu`` of the input
state and every pair ``i < j`` of reference eigenvectors::

    basis  c_b  P_i P_psi
    plus   c_p (P_i + P_j) P_psi
    times  c_t (P_i + i P_j) P_psi

Second-measurement elements mirror these with ``P_phi`` on the left.  The
nominal weights ``c_b^2 = 1/d`` and ``c_p^2 = c_t^2 = 1/(2d)`` are audited at
construction: the family is rescaled so that ``sum M^dag M = I`` holds
exactly (the factor is one whenever the nominal weights are already
complete).  Reconstruction divides each probability by the squared weights
of its two elements before applying the inversion rules.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .channels import KrausChannel
from .errors import DimensionMismatch, InconsistentLabels
from .fluctuation import TpmQuasiProb, TransitionBasis
from .matrixcore import DensityOperator, as_matrix, dagger
from .petz import RecoveryFamily, rotated_petz

TAGS = ("basis", "plus", "times")
INVERSION_4X4 = np.array(
    [[1, 1j, 1j, -1], [1, -1j, 1j, 1], [1, 1j, -1j, 1], [1, -1j, -1j, -1]], dtype=complex
)


def nominal_weights(d: int) -> dict[str, float]:
    """Nominal squared element weights of the ``d``-dimensional protocol."""
    return {"basis": 1.0 / d, "plus": 1.0 / (2 * d), "times": 1.0 / (2 * d)}


def audited_weights(d: int) -> dict[str, float]:
    """Nominal weights rescaled by one common positive factor so the family is complete.

    ``sum M^dag M = (w_b + (d - 1)(w_p + w_t)) I`` for each side, so the
    factor is the inverse of that bracket.
    """
    w = nominal_weights(d)
    total = w["basis"] + (d - 1) * (w["plus"] + w["times"])
    return {tag: val / total for tag, val in w.items()}


@dataclass(frozen=True, eq=False)
class PovmSet:
    """Measurement operators with labels ``(state_index, tag, a, b)``.

    ``a == b`` for ``basis`` elements; ``a < b`` otherwise.  ``weights`` maps
    each tag to the squared normalisation applied to its elements.
    """

    elements: np.ndarray
    labels: tuple
    weights: dict

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def dim(self) -> int:
        return self.elements.shape[-1]

    def completeness_defect(self) -> float:
        S = np.einsum("mba,mbc->ac", self.elements.conj(), self.elements)
        return float(np.max(np.abs(S - np.eye(self.dim))))

    def index(self) -> dict:
        return {lab: n for n, lab in enumerate(self.labels)}


def _pair_ops(P: np.ndarray):
    """Yield ``(tag, a, b, A)`` with ``A`` the combination of eigenprojectors."""
    d = P.shape[0]
    for a in range(d):
        yield "basis", a, a, P[a]
    for a in range(d):
        for b in range(a + 1, d):
            yield "plus", a, b, P[a] + P[b]
            yield "times", a, b, P[a] + 1j * P[b]


def _projectors(V: np.ndarray) -> np.ndarray:
    return np.einsum("ak,bk->kab", V, V.conj())


def build_povms(basis: TransitionBasis) -> tuple[PovmSet, PovmSet]:
    d_in, d_out = basis.dims
    w_in, w_out = audited_weights(d_in), audited_weights(d_out)
    Pi = _projectors(basis.reference.eigenvectors)
    Pk = _projectors(basis.evolved_reference.eigenvectors)
    Ppsi = _projectors(basis.initial.eigenvectors)
    Pphi = _projectors(basis.final.eigenvectors)
    first, first_labels = [], []
    for mu in range(d_in):
        for tag, a, b, A in _pair_ops(Pi):
            first.append(np.sqrt(w_in[tag]) * A @ Ppsi[mu])
            first_labels.append((mu, tag, a, b))
    second, second_labels = [], []
    for nu in range(d_out):
        for tag, a, b, B in _pair_ops(Pk):
            second.append(np.sqrt(w_out[tag]) * Pphi[nu] @ B)
            second_labels.append((nu, tag, a, b))
    return (
        PovmSet(np.array(first), tuple(first_labels), w_in),
        PovmSet(np.array(second), tuple(second_labels), w_out),
    )


@dataclass(frozen=True, eq=False)
class TwoPointDistribution:
    """``probs[m, m']`` over first-set labels ``m`` and second-set labels ``m'``."""

    probs: np.ndarray
    first_labels: tuple
    second_labels: tuple
    direction: str = "forward"

    def total(self) -> float:
        return float(self.probs.sum())

    def as_dict(self) -> dict:
        return {
            (a, b): float(self.probs[m, n])
            for m, a in enumerate(self.first_labels)
            for n, b in enumerate(self.second_labels)
        }

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["label_m", "label_m_prime", "probability"])
            for m, a in enumerate(self.first_labels):
                for n, b in enumerate(self.second_labels):
                    w.writerow([_fmt_label(a), _fmt_label(b), f"{self.probs[m, n]:.17g}"])


def _fmt_label(lab) -> str:
    return "{}:{}:{}:{}".format(*lab)


def _parse_label(text: str):
    parts = text.split(":")
    if len(parts) != 4 or parts[1] not in TAGS:
        raise InconsistentLabels(f"malformed label {text!r}")
    return int(parts[0]), parts[1], int(parts[2]), int(parts[3])


def read_distribution_csv(path, direction: str = "forward") -> TwoPointDistribution:
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != ["label_m", "label_m_prime", "probability"]:
            raise InconsistentLabels(f"unexpected header {header}")
        for row in reader:
            rows.append((_parse_label(row[0]), _parse_label(row[1]), float(row[2])))
    first = tuple(dict.fromkeys(r[0] for r in rows))
    second = tuple(dict.fromkeys(r[1] for r in rows))
    fi = {lab: n for n, lab in enumerate(first)}
    si = {lab: n for n, lab in enumerate(second)}
    probs = np.zeros((len(first), len(second)))
    for a, b, p in rows:
        probs[fi[a], si[b]] = p
    return TwoPointDistribution(probs, first, second, direction)


def two_point_distribution(ch: KrausChannel, rho, first: PovmSet, second: PovmSet) -> TwoPointDistribution:
    """``Tr[M'_m' N(M_m rho M_m^dag) M'_m'^dag]`` for all outcome pairs."""
    X = as_matrix(rho)
    if first.dim != ch.dim_in or second.dim != ch.dim_out or X.shape[0] != ch.dim_in:
        raise DimensionMismatch("POVM sets, state and channel dimensions disagree")
    M = first.elements
    inner = M @ X[None] @ dagger(M)
    K = ch.kraus_ops
    Y = np.einsum("kab,mbc,kdc->mad", K, inner, K.conj(), optimize=True)
    Mp = second.elements
    probs = np.einsum("pab,mbc,pac->mp", Mp, Y, Mp.conj(), optimize=True).real
    return TwoPointDistribution(probs, first.labels, second.labels, "forward")


def backward_two_point_distribution(fam: RecoveryFamily, theta: float, rho, first: PovmSet,
                                    second: PovmSet) -> TwoPointDistribution:
    """``Tr[M_m^dag R^theta(M'_m'^dag N(rho) M'_m') M_m]`` for all outcome pairs."""
    out = fam.forward.apply_matrix(as_matrix(rho))
    Mp = second.elements
    inner = dagger(Mp) @ out[None] @ Mp
    R = rotated_petz(fam, theta).kraus_ops
    Y = np.einsum("kab,pbc,kdc->pad", R, inner, R.conj(), optimize=True)
    M = first.elements
    probs = np.einsum("mba,pbc,mca->mp", M.conj(), Y, M, optimize=True).real
    return TwoPointDistribution(probs, first.labels, second.labels, "backward")


def _block_lookup(dist: TwoPointDistribution, basis: TransitionBasis):
    d_in, d_out = basis.dims
    expect_first = {(mu, t, a, b) for mu in range(d_in) for t, a, b, _ in _pair_labels(d_in)}
    expect_second = {(nu, t, a, b) for nu in range(d_out) for t, a, b, _ in _pair_labels(d_out)}
    if set(dist.first_labels) != expect_first or set(dist.second_labels) != expect_second:
        raise InconsistentLabels("distribution labels do not match the transition basis dimensions")
    w_in, w_out = audited_weights(d_in), audited_weights(d_out)
    fi = {lab: n for n, lab in enumerate(dist.first_labels)}
    si = {lab: n for n, lab in enumerate(dist.second_labels)}

    def S(mu, nu, x, y):
        m = fi[(mu,) + x]
        n = si[(nu,) + y]
        return dist.probs[m, n] / (w_in[x[0]] * w_out[y[0]])

    return S


def _pair_labels(d: int):
    for a in range(d):
        yield "basis", a, a, None
    for a in range(d):
        for b in range(a + 1, d):
            yield "plus", a, b, None
            yield "times", a, b, None


def reconstruct_quasiprob(dist: TwoPointDistribution, basis: TransitionBasis) -> TpmQuasiProb:
    """Invert a two-point POVM distribution into the six-index table.

    Rules per ``(mu, nu)`` block, with ``S`` the weight-normalised
    probabilities and ``b_i`` / ``+_ij`` / ``x_ij`` the element tags:

    * ``P[ii,kk] = S(b_i, b_k)``
    * ``Q(i, t') = S(b_i, t'_kl) - S(b_i, b_k) - S(b_i, b_l)`` and
      ``P[ii,kl], P[ii,lk] = (Q(i,+') +- i Q(i,x')) / 2``; the same rule with
      the sides exchanged gives ``P[ij,kk], P[ji,kk]``.
    * ``Q(t, t')`` by inclusion-exclusion of all lower-order terms, then the
      four doubly-off-diagonal entries are ``INVERSION_4X4 @ Q / 4``.

    Backward distributions are reconstructed with the same rules and then
    transposed ``(i <-> j, k <-> l)``, because their elements enter with
    conjugated coefficients.
    """
    S = _block_lookup(dist, basis)
    d_in, d_out = basis.dims
    P = np.zeros((d_in, d_out, d_in, d_in, d_out, d_out), dtype=complex)
    B = lambda a: ("basis", a, a)  # noqa: E731
    for mu in range(d_in):
        for nu in range(d_out):
            s = lambda x, y: S(mu, nu, x, y)  # noqa: E731
            blk = P[mu, nu]
            for i in range(d_in):
                for k in range(d_out):
                    blk[i, i, k, k] = s(B(i), B(k))
            for i in range(d_in):
                for k in range(d_out):
                    for l in range(k + 1, d_out):
                        base = s(B(i), B(k)) + s(B(i), B(l))
                        qp = s(B(i), ("plus", k, l)) - base
                        qt = s(B(i), ("times", k, l)) - base
                        blk[i, i, k, l] = 0.5 * (qp + 1j * qt)
                        blk[i, i, l, k] = 0.5 * (qp - 1j * qt)
            for i in range(d_in):
                for j in range(i + 1, d_in):
                    for k in range(d_out):
                        base = s(B(i), B(k)) + s(B(j), B(k))
                        qp = s(("plus", i, j), B(k)) - base
                        qt = s(("times", i, j), B(k)) - base
                        blk[i, j, k, k] = 0.5 * (qp + 1j * qt)
                        blk[j, i, k, k] = 0.5 * (qp - 1j * qt)
            for i in range(d_in):
                for j in range(i + 1, d_in):
                    for k in range(d_out):
                        for l in range(k + 1, d_out):
                            q = []
                            for t in ("plus", "times"):
                                for tp in ("plus", "times"):
                                    x, y = (t, i, j), (tp, k, l)
                                    val = s(x, y)
                                    val -= s(B(i), y) + s(B(j), y)
                                    val -= s(x, B(k)) + s(x, B(l))
                                    val += s(B(i), B(k)) + s(B(i), B(l)) + s(B(j), B(k)) + s(B(j), B(l))
                                    q.append(val)
                            e = 0.25 * INVERSION_4X4 @ np.array(q)
                            blk[i, j, k, l], blk[i, j, l, k], blk[j, i, k, l], blk[j, i, l, k] = e
    if dist.direction == "backward":
        P = np.transpose(P, (0, 1, 3, 2, 5, 4)).copy()
    return TpmQuasiProb(P, basis, dist.direction)


def state_dims_match(basis: TransitionBasis, rho) -> bool:
    rho = rho if isinstance(rho, DensityOperator) else DensityOperator(rho)
    return rho.dim == basis.dims[0]
