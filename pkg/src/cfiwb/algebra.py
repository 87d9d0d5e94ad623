"""Exact arithmetic over F_p and Z_m: elimination, solution sets, intertwiners, similarity."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from math import gcd

import numpy as np
import scipy.sparse as sp

from .errors import InternalError, UsageError

DEFAULT_TRIALS = 512
DEFAULT_EXHAUSTIVE = 2 ** 16


def is_prime(p: int) -> bool:
    if p < 2:
        return False
    i = 2
    while i * i <= p:
        if p % i == 0:
            return False
        i += 1
    return True


@dataclass(frozen=True)
class Modulus:
    m: int

    def __post_init__(self):
        if not isinstance(self.m, (int, np.integer)) or self.m < 2:
            raise UsageError(f"modulus must be an integer >= 2, got {self.m!r}")

    @property
    def classification(self) -> str:
        if is_prime(self.m):
            return "prime"
        if self.m & (self.m - 1) == 0:
            return "power-of-two"
        return "general"


def _check_prime(p: int) -> int:
    if not is_prime(int(p)):
        raise UsageError(f"modulus {p} is not prime")
    return int(p)


# -- F_p elimination -----------------------------------------------------

def _work_dtype(p: int):
    # smallest signed type holding (p - 1)**2 with room for one subtraction
    if p <= 181:
        return np.int16
    return np.int32 if p <= 32767 else np.int64


def rref_mod_p(A, p: int) -> tuple[np.ndarray, list[int]]:
    """Reduced row echelon form over F_p; returns the non-zero rows and pivot columns."""
    if p == 2:
        R = (np.asarray(A, dtype=np.int64) & 1).astype(np.uint8)
    else:
        R = (np.asarray(A, dtype=np.int64) % p).astype(_work_dtype(p))
    if R.ndim != 2:
        raise UsageError("expected a 2-d matrix")
    rows, cols = R.shape
    pivots: list[int] = []
    r = 0
    for c in range(cols):
        if r == rows:
            break
        nz = np.flatnonzero(R[r:, c])
        if nz.size == 0:
            continue
        piv = r + int(nz[0])
        if piv != r:
            R[[r, piv]] = R[[piv, r]]
        if p == 2:
            col = R[:, c].copy()
            col[r] = 0
            hit = np.flatnonzero(col)
            if hit.size:
                R[hit] ^= R[r]
        else:
            inv = pow(int(R[r, c]), -1, p)
            R[r] = (R[r] * inv) % p
            col = R[:, c].copy()
            col[r] = 0
            hit = np.flatnonzero(col)
            if hit.size:
                R[hit] = (R[hit] - np.outer(col[hit], R[r])) % p
        pivots.append(c)
        r += 1
    return R[:r].astype(np.int64), pivots


def _nullspace_from_rref(R: np.ndarray, pivots: list[int], ncols: int, p: int) -> np.ndarray:
    free = [c for c in range(ncols) if c not in set(pivots)]
    basis = np.zeros((len(free), ncols), dtype=np.int64)
    for i, f in enumerate(free):
        basis[i, f] = 1
        for row, pc in enumerate(pivots):
            basis[i, pc] = (-R[row, f]) % p
    return basis


def fp_nullspace(M, p: int) -> np.ndarray:
    """Rows form a basis of {x : M x = 0} over F_p."""
    p = _check_prime(p)
    M = np.asarray(M, dtype=np.int64)
    R, piv = rref_mod_p(M, p)
    return _nullspace_from_rref(R, piv, M.shape[1], p)


def fp_rank(M, p: int) -> int:
    p = _check_prime(p)
    M = np.asarray(M, dtype=np.int64)
    if M.size == 0:
        return 0
    return len(rref_mod_p(M, p)[1])


@dataclass(frozen=True)
class AffineSolutionSet:
    """Solutions of ``M x = b`` over Z_m: ``particular + span(generators)``; ``particular`` is None when inconsistent."""

    modulus: int
    particular: tuple[int, ...] | None
    generators: tuple[tuple[int, ...], ...] = ()

    @property
    def consistent(self) -> bool:
        return self.particular is not None

    def satisfies(self, M, b) -> bool:
        M = np.asarray(M, dtype=np.int64)
        if self.particular is None:
            return True
        m = self.modulus
        x = np.asarray(self.particular, dtype=np.int64)
        if np.any((M @ x - np.asarray(b, dtype=np.int64)) % m):
            return False
        return all(not np.any((M @ np.asarray(g, dtype=np.int64)) % m) for g in self.generators)


def _check_system(M, b):
    M = np.atleast_2d(np.asarray(M, dtype=np.int64))
    b = np.asarray(b, dtype=np.int64).reshape(-1)
    if M.shape[0] != b.shape[0]:
        raise UsageError(f"dimension mismatch: matrix has {M.shape[0]} rows, right-hand side {b.shape[0]}")
    return M, b


def fp_solve(M, b, p: int) -> AffineSolutionSet:
    p = _check_prime(p)
    M, b = _check_system(M, b)
    n = M.shape[1]
    R, piv = rref_mod_p(np.hstack([M, b[:, None]]), p)
    if piv and piv[-1] == n:
        return AffineSolutionSet(p, None, ())
    x = np.zeros(n, dtype=np.int64)
    for row, c in enumerate(piv):
        x[c] = R[row, n]
    null = _nullspace_from_rref(R[:, :n], piv, n, p)
    return AffineSolutionSet(p, tuple(int(v) for v in x), tuple(tuple(int(v) for v in g) for g in null))


# -- Z_m elimination -----------------------------------------------------

def _egcd(a: int, b: int) -> tuple[int, int, int]:
    s0, s1, t0, t1 = 1, 0, 0, 1
    while b:
        q, a, b = a // b, b, a % b
        s0, s1 = s1, s0 - q * s1
        t0, t1 = t1, t0 - q * t1
    return a, s0, t0


def _unit_to_gcd(a: int, m: int) -> int:
    """A unit u of Z_m with u*a = gcd(a, m) (mod m)."""
    g = gcd(a, m)
    mg = m // g
    u0 = pow((a // g) % mg, -1, mg) if mg > 1 else 1
    u = u0
    while gcd(u, m) != 1:
        u += mg
    return u % m


def howell_rows(rows: list[list[int]], ncols: int, m: int) -> list[tuple[int, list[int]]]:
    """Echelon form over Z_m closed under annihilator multiples.

    Returns ``(pivot_column, row)`` pairs with pivot entries dividing ``m``.
    Pivot choice is the row whose entry has the smallest gcd with ``m``.
    """
    work = [[x % m for x in r] for r in rows]
    work = [r for r in work if any(r)]
    out: list[tuple[int, list[int]]] = []
    for c in range(ncols):
        cand = [r for r in work if r[c]]
        rest = [r for r in work if not r[c]]
        if not cand:
            work = rest
            continue
        cand.sort(key=lambda r: gcd(r[c], m))
        piv = cand[0]
        for r in cand[1:]:
            a, b = piv[c], r[c]
            if b % gcd(a, m) == 0:
                g = gcd(a, m)
                u = _unit_to_gcd(a, m)
                f = (b // g) * u % m
                # a*u = g, so r - f*piv has zero at column c
                new_r = [(y - f * x) % m for x, y in zip(piv, r)]
            else:
                g, s, t = _egcd(a, b)
                new_piv = [(s * x + t * y) % m for x, y in zip(piv, r)]
                new_r = [((b // g) * x - (a // g) * y) % m for x, y in zip(piv, r)]
                piv = new_piv
            if any(new_r):
                rest.append(new_r)
        u = _unit_to_gcd(piv[c], m)
        piv = [(u * x) % m for x in piv]
        g = piv[c]
        ann = [((m // g) * x) % m for x in piv]
        if any(ann):
            rest.append(ann)
        out.append((c, piv))
        work = [r for r in rest if any(r)]
    # reduce entries above pivots
    for i in range(len(out) - 1, -1, -1):
        c, prow = out[i]
        g = prow[c]
        for j in range(i):
            cj, row = out[j]
            f = row[c] // g
            if f:
                out[j] = (cj, [(y - f * x) % m for x, y in zip(prow, row)])
    return out


def _back_substitute(H, n: int, m: int, rhs_col: bool, x: list[int]) -> list[int]:
    for c, row in reversed(H):
        if c >= n:
            continue
        beta = row[n] if rhs_col else 0
        s = sum(row[l] * x[l] for l in range(c + 1, n))
        v = (beta - s) % m
        g = row[c]
        if v % g:
            raise InternalError("Z_m back-substitution hit a non-divisible pivot")
        x[c] = (x[c] + v // g) % m
    return x


def _in_span(vec, gens, m: int) -> bool:
    if not gens:
        return not any(v % m for v in vec)
    G = np.array(gens, dtype=np.int64).T
    return _zm_consistent(G, np.asarray(vec, dtype=np.int64), m)


def _zm_consistent(M: np.ndarray, b: np.ndarray, m: int) -> bool:
    n = M.shape[1]
    rows = [list(map(int, r)) + [int(bi)] for r, bi in zip(M, b)]
    H = howell_rows(rows, n + 1, m)
    return not any(c == n for c, _ in H)


def zm_solve(M, b, m: int) -> AffineSolutionSet:
    """Decide and describe ``M x = b`` over Z_m by gcd-pivoted elimination."""
    m = int(m)
    if m < 2:
        raise UsageError("modulus must be >= 2")
    M, b = _check_system(M, b)
    n = M.shape[1]
    rows = [list(map(int, r)) + [int(bi)] for r, bi in zip(M, b)]
    H = howell_rows(rows, n + 1, m)
    if any(c == n for c, _ in H):
        return AffineSolutionSet(m, None, ())
    x = _back_substitute(H, n, m, True, [0] * n)
    pivot_cols = {c: row for c, row in H if c < n}
    gens: list[list[int]] = []
    for f in range(n):
        if f not in pivot_cols:
            y = [0] * n
            y[f] = 1
            gens.append(_back_substitute([h for h in H if h[0] < f], n, m, False, y))
    for c, row in pivot_cols.items():
        g = row[c]
        if g != 1:
            y = [0] * n
            y[c] = m // g
            gens.append(_back_substitute([h for h in H if h[0] < c], n, m, False, y))
    gens.sort(key=lambda v: [i for i, t in enumerate(v) if t][-1] if any(v) else -1)
    # drop generators already in the span of the others
    kept = list(gens)
    i = 0
    while i < len(kept):
        others = kept[:i] + kept[i + 1:]
        if _in_span(kept[i], others, m):
            kept.pop(i)
        else:
            i += 1
    return AffineSolutionSet(m, tuple(x), tuple(tuple(v) for v in kept))


# -- intertwiners and similarity ----------------------------------------

@dataclass(frozen=True)
class IntertwinerBasis:
    """Basis of {S : S M_c = N_c S for all c} over F_p; ``basis`` has shape (r, n', n)."""

    p: int
    basis: np.ndarray
    shape: tuple[int, int]

    @property
    def dim(self) -> int:
        return int(self.basis.shape[0])


def _as_family(Ms) -> list[np.ndarray]:
    fam = [np.asarray(M, dtype=np.int64) for M in Ms]
    for M in fam:
        if M.ndim != 2:
            raise UsageError("family members must be 2-d matrices")
    return fam


def intertwiner_space(Ms, Ns, p: int) -> IntertwinerBasis:
    """Solve the stacked system vec(S M_c - N_c S) = 0 in n'*n unknowns."""
    p = _check_prime(p)
    Ms, Ns = _as_family(Ms), _as_family(Ns)
    if len(Ms) != len(Ns):
        raise UsageError("families must have equal length")
    if not Ms:
        raise UsageError("empty families: dimensions are undetermined")
    n = Ms[0].shape[0]
    n2 = Ns[0].shape[0]
    for M in Ms:
        if M.shape != (n, n):
            raise UsageError("all M_c must be n x n")
    for N in Ns:
        if N.shape != (n2, n2):
            raise UsageError("all N_c must be n' x n'")
    unknowns = n * n2
    if unknowns == 0:
        return IntertwinerBasis(p, np.zeros((0, n2, n), dtype=np.int64), (n2, n))
    R = np.zeros((0, unknowns), dtype=np.int64)
    In, In2 = np.eye(n, dtype=np.int64), np.eye(n2, dtype=np.int64)
    for M, N in zip(Ms, Ns):
        K = (np.kron(In2, M.T) - np.kron(N, In)) % p
        R, piv = rref_mod_p(np.vstack([R, K]), p)
    R, piv = rref_mod_p(R, p) if R.shape[0] else (R, [])
    null = _nullspace_from_rref(R, piv, unknowns, p)
    return IntertwinerBasis(p, null.reshape(-1, n2, n), (n2, n))


def batched_invertible(stack: np.ndarray, p: int) -> np.ndarray:
    """Invertibility over F_p of each matrix in a (B, n, n) stack."""
    A = np.array(stack, dtype=np.int64) % p
    B, n, _ = A.shape
    ok = np.ones(B, dtype=bool)
    if n == 0:
        return ok
    inv_table = np.zeros(p, dtype=np.int64)
    for a in range(1, p):
        inv_table[a] = pow(a, -1, p)
    ar = np.arange(B)
    for c in range(n):
        nz = A[:, c:, c] != 0
        has = nz.any(axis=1)
        ok &= has
        piv = c + np.argmax(nz, axis=1)
        row_c = A[ar, c].copy()
        A[ar, c] = A[ar, piv]
        A[ar, piv] = row_c
        scale = inv_table[A[:, c, c]]
        A[:, c] = (A[:, c] * scale[:, None]) % p
        if c + 1 < n:
            f = A[:, c + 1:, c]
            A[:, c + 1:] = (A[:, c + 1:] - f[:, :, None] * A[:, c, None, :]) % p
    return ok


@dataclass
class SearchResult:
    """Outcome of an invertible-element search: ``status`` is found, not_found or unknown."""

    status: str
    matrix: np.ndarray | None = None
    trials: int = 0
    exhaustive: bool = False


def find_invertible(B: IntertwinerBasis, rng=None, trials: int = DEFAULT_TRIALS,
                    exhaustive: int = DEFAULT_EXHAUSTIVE) -> SearchResult:
    """Look for an invertible element of the span of ``B``.

    Tries single basis elements, then ``trials`` random combinations, then all
    p**r combinations when that count is within ``exhaustive``.
    """
    p = B.p
    n2, n = B.shape
    if n2 != n:
        return SearchResult("not_found")
    r = B.dim
    if n == 0:
        return SearchResult("found", np.zeros((0, 0), dtype=np.int64))
    if r == 0:
        return SearchResult("not_found", exhaustive=True)
    rng = np.random.default_rng(0) if rng is None else rng
    basis = B.basis.astype(np.int64)
    ok = batched_invertible(basis, p)
    if ok.any():
        return SearchResult("found", basis[int(np.argmax(ok))] % p, trials=r)
    done = r
    chunk = 128
    while done - r < trials:
        k = min(chunk, trials - (done - r))
        coef = rng.integers(0, p, size=(k, r))
        cand = np.einsum("kr,rij->kij", coef, basis) % p
        ok = batched_invertible(cand, p)
        done += k
        if ok.any():
            return SearchResult("found", cand[int(np.argmax(ok))], trials=done)
    if p ** r <= exhaustive:
        combos = itertools.product(range(p), repeat=r)
        while True:
            block = list(itertools.islice(combos, 1024))
            if not block:
                break
            coef = np.array(block, dtype=np.int64)
            cand = np.einsum("kr,rij->kij", coef, basis) % p
            ok = batched_invertible(cand, p)
            done += len(block)
            if ok.any():
                return SearchResult("found", cand[int(np.argmax(ok))], trials=done, exhaustive=True)
        return SearchResult("not_found", trials=done, exhaustive=True)
    return SearchResult("unknown", trials=done)


@dataclass
class SimilarityVerdict:
    """``status`` is similar, not_similar or unknown; ``witness`` is a verified S when similar."""

    status: str
    witness: np.ndarray | None = None
    reason: str = ""
    detail: dict = field(default_factory=dict)

    @property
    def similar(self) -> bool:
        return self.status == "similar"


def verify_intertwiner(S, Ms, Ns, p: int) -> bool:
    S = np.asarray(S, dtype=np.int64)
    return all(not np.any((S @ M - N @ S) % p) for M, N in zip(_as_family(Ms), _as_family(Ns)))


def similarity_invariants(Ms, p: int, max_len: int = 3) -> dict:
    """Ranks of each member and traces of all products of length <= ``max_len``, over F_p."""
    fam = _as_family(Ms)
    inv: dict = {"rank": tuple(fp_rank(M, p) if M.size else 0 for M in fam)}
    idx = range(len(fam))
    for length in range(1, max_len + 1):
        traces = []
        for word in itertools.product(idx, repeat=length):
            P = fam[word[0]]
            for w in word[1:]:
                P = (P @ fam[w]) % p
            traces.append(int(np.trace(P)) % p)
        inv[f"trace{length}"] = tuple(traces)
    return inv


def simultaneous_similarity(Ms, Ns, p: int, rng=None, trials: int = DEFAULT_TRIALS,
                            exhaustive: int = DEFAULT_EXHAUSTIVE, invariant_len: int = 3) -> SimilarityVerdict:
    """Three-valued test for an invertible S with S M_c = N_c S for every c."""
    p = _check_prime(p)
    Ms, Ns = _as_family(Ms), _as_family(Ns)
    if len(Ms) != len(Ns):
        raise UsageError("families must have equal length")
    shapes = {M.shape for M in Ms} | {N.shape for N in Ns}
    if len(shapes) > 1 or any(s[0] != s[1] for s in shapes):
        raise UsageError("simultaneous similarity needs square matrices of one common size")
    n = Ms[0].shape[0] if Ms else 0
    if n == 0:
        return SimilarityVerdict("similar", np.zeros((0, 0), dtype=np.int64), "empty")
    inv_m = similarity_invariants(Ms, p, invariant_len)
    inv_n = similarity_invariants(Ns, p, invariant_len)
    for key in inv_m:
        if inv_m[key] != inv_n[key]:
            return SimilarityVerdict("not_similar", reason=f"invariant {key} differs")
    space = intertwiner_space(Ms, Ns, p)
    if space.dim == 0:
        return SimilarityVerdict("not_similar", reason="intertwiner space is zero")
    res = find_invertible(space, rng, trials, exhaustive)
    if res.status == "found":
        if not verify_intertwiner(res.matrix, Ms, Ns, p) or fp_rank(res.matrix, p) != n:
            raise InternalError("invertible intertwiner failed verification")
        return SimilarityVerdict("similar", res.matrix, "witness", {"dim": space.dim})
    if res.status == "not_found":
        return SimilarityVerdict("not_similar", reason="no invertible element (exhaustive)",
                                 detail={"dim": space.dim})
    dm = intertwiner_space(Ms, Ms, p).dim
    dn = intertwiner_space(Ns, Ns, p).dim
    if dm != space.dim or dn != space.dim:
        return SimilarityVerdict("not_similar", reason="Hom dimensions differ",
                                 detail={"hom": space.dim, "end_m": dm, "end_n": dn})
    return SimilarityVerdict("unknown", reason="search budget exhausted",
                             detail={"dim": space.dim, "trials": res.trials})


def _batched_rank_gf2(A: np.ndarray) -> np.ndarray:
    """Rank over F_2 with every row packed into one 64-bit word (at most 64 columns)."""
    B, rows, cols = A.shape
    weights = np.left_shift(np.uint64(1), np.arange(cols, dtype=np.uint64))
    R = (A.astype(np.uint64) * weights).sum(axis=2, dtype=np.uint64)
    used = np.zeros((B, rows), dtype=bool)
    rank = np.zeros(B, dtype=np.int64)
    ar = np.arange(B)
    for j in range(cols):
        bit = np.uint64(1) << np.uint64(j)
        has = ((R & bit) != 0) & ~used
        exists = has.any(axis=1)
        if not exists.any():
            continue
        piv = np.argmax(has, axis=1)
        prow = R[ar, piv]
        has[ar, piv] = False
        has &= exists[:, None]
        R ^= np.where(has, prow[:, None], np.uint64(0))
        used[ar[exists], piv[exists]] = True
        rank += exists
    return rank


def batched_rank(stack: np.ndarray, p: int) -> np.ndarray:
    """Rank over F_p of each matrix in a (B, r, c) stack."""
    A = np.array(stack, dtype=np.int64) % p
    B, rows, cols = A.shape
    if p == 2 and 0 < cols <= 64 and rows and B:
        return _batched_rank_gf2(A)
    A = A.astype(_work_dtype(p))
    rank = np.zeros(B, dtype=np.int64)
    if rows == 0 or cols == 0 or B == 0:
        return rank
    inv_table = np.zeros(p, dtype=np.int64)
    for a in range(1, p):
        inv_table[a] = pow(a, -1, p)
    ar = np.arange(B)
    ridx = np.arange(rows)
    for c in range(cols):
        live = rank < rows
        if not live.any():
            break
        mask = (A[:, :, c] != 0) & (ridx[None, :] >= rank[:, None])
        has = mask.any(axis=1) & live
        if not has.any():
            continue
        b = ar[has]
        r = rank[has]
        piv = np.argmax(mask[has], axis=1)
        top = A[b, r].copy()
        A[b, r] = A[b, piv]
        A[b, piv] = top
        scale = inv_table[A[b, r, c]]
        A[b, r] = (A[b, r] * scale[:, None]) % p
        f = A[b, :, c].copy()
        f[np.arange(len(b)), r] = 0
        f[ridx[None, :] < r[:, None]] = 0
        A[b] = (A[b] - f[:, :, None] * A[b, r][:, None, :]) % p
        rank[has] += 1
    return rank


def color_family(X: np.ndarray, colors) -> list[np.ndarray]:
    """Indicator matrices 1[X == c] for each color c."""
    return [(X == c).astype(np.int64) for c in colors]


def _pure_diagonal_keys(X: np.ndarray, Y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    n = X.shape[0]
    off = ~np.eye(n, dtype=bool)
    offcolors = np.union1d(X[off], Y[off])
    dx, dy = np.diag(X).copy(), np.diag(Y).copy()
    dx[np.isin(dx, offcolors)] = -1
    dy[np.isin(dy, offcolors)] = -1
    return dx, dy


_ROW_WEIGHTS = np.random.default_rng(0x5EED).integers(1, 2 ** 61, size=(2, 1 << 16), dtype=np.int64)


def _distinct_rows(ridx, col, val, n_rows: int, n_cols: int, p: int) -> np.ndarray:
    """Dense nonzero rows of the sparse matrix sum(val at (ridx, col)) mod p, duplicates removed.

    Duplicates are found through two random 64-bit row fingerprints, so the
    dense matrix is only formed for the distinct rows.
    """
    M = sp.csr_matrix((val, (ridx, col)), shape=(n_rows, n_cols))
    M.sum_duplicates()
    M.data %= p
    M.eliminate_zeros()
    nz = np.flatnonzero(np.diff(M.indptr))
    if nz.size == 0:
        return np.zeros((0, n_cols), dtype=np.int64)
    M = M[nz]
    if n_cols <= _ROW_WEIGHTS.shape[1]:
        w = _ROW_WEIGHTS[:, :n_cols]
    else:
        w = np.random.default_rng(0x5EED).integers(1, 2 ** 61, size=(2, n_cols), dtype=np.int64)
    with np.errstate(over="ignore"):
        h = np.stack([np.add.reduceat(M.data * w[q][M.indices], M.indptr[:-1]) for q in range(2)], axis=1)
    _, first = np.unique(h, axis=0, return_index=True)
    return np.asarray(M[np.sort(first)].todense(), dtype=np.int64)


def colored_intertwiner_space(X, Y, p: int) -> IntertwinerBasis:
    """Intertwiners of the families 1[X == c] and 1[Y == c] over the union of colors.

    A color that occurs only on diagonals gives a pair of diagonal projections,
    which forces S to be block-shaped; only the unknowns inside those blocks are
    kept. The result equals the unrestricted solution space.
    """
    p = _check_prime(p)
    X = np.asarray(X, dtype=np.int64)
    Y = np.asarray(Y, dtype=np.int64)
    n = X.shape[0]
    if X.shape != (n, n) or Y.shape != (n, n):
        raise UsageError("color matrices must be square of one common size")
    if n == 0:
        return IntertwinerBasis(p, np.zeros((0, 0, 0), dtype=np.int64), (0, 0))
    kx, ky = _pure_diagonal_keys(X, Y)
    rows_a, cols_x = np.nonzero(ky[:, None] == kx[None, :])
    U = rows_a.size
    if U == 0:
        return IntertwinerBasis(p, np.zeros((0, n, n), dtype=np.int64), (n, n))
    ar = np.arange(n)
    # S[a, x] enters (S M_c)[a, y] for c = X[x, y] and (N_c S)[a', x] for c = Y[a', a]
    base = n * n
    k1 = X[cols_x, :] * base + rows_a[:, None] * n + ar[None, :]
    k2 = Y[:, rows_a].T * base + ar[None, :] * n + cols_x[:, None]
    keys = np.concatenate([k1.ravel(), k2.ravel()])
    uniq, ridx = np.unique(keys, return_inverse=True)
    col = np.concatenate([np.repeat(np.arange(U), n), np.repeat(np.arange(U), n)])
    val = np.concatenate([np.ones(U * n, dtype=np.int64), -np.ones(U * n, dtype=np.int64)])
    E = _distinct_rows(ridx.ravel(), col, val, uniq.size, U, p)
    if E.shape[0]:
        R, piv = rref_mod_p(E, p)
    else:
        R, piv = E, []
    null = _nullspace_from_rref(R, piv, U, p)
    basis = np.zeros((null.shape[0], n, n), dtype=np.int64)
    basis[:, rows_a, cols_x] = null
    return IntertwinerBasis(p, basis, (n, n))


def colored_invariants(X, p: int, traces: int = 2) -> tuple:
    """Similarity invariants of the family 1[X == c]: per-color ranks and traces of short products mod p.

    Returned as a hashable canonical tuple so families can be bucketed before
    any pairwise intertwiner computation.
    """
    X = np.asarray(X, dtype=np.int64)
    n = X.shape[0]
    colors, inv, counts = np.unique(X, return_inverse=True, return_counts=True)
    inv = inv.reshape(X.shape)
    # a color with at most one cell per row and per column is a partial permutation: rank = count
    rows = np.zeros((colors.size, n), dtype=np.int64)
    cols = np.zeros((colors.size, n), dtype=np.int64)
    np.add.at(rows, (inv, np.arange(n)[:, None]), 1)
    np.add.at(cols, (inv, np.arange(n)[None, :]), 1)
    ranks = counts.copy()
    hard = np.flatnonzero((rows.max(axis=1) > 1) | (cols.max(axis=1) > 1))
    if hard.size:
        stack = (inv[None, :, :] == hard[:, None, None]).astype(np.int64)
        ranks[hard] = batched_rank(stack, p)
    out = [tuple(zip(colors.tolist(), ranks.tolist()))]
    if traces >= 1:
        d, cnt = np.unique(np.diag(X), return_counts=True)
        out.append(tuple((int(c), int(k % p)) for c, k in zip(d, cnt) if k % p))
    if traces >= 2:
        # trace(M_a M_b) counts the positions (x, y) with X[x, y] = a and X[y, x] = b
        base = int(X.max()) + 1
        u, cnt = np.unique(X.ravel() * base + X.T.ravel(), return_counts=True)
        out.append(tuple((int(c // base), int(c % base), int(k % p)) for c, k in zip(u, cnt) if k % p))
    if traces >= 3:
        n = X.shape[0]
        i, j, k = np.meshgrid(np.arange(n), np.arange(n), np.arange(n), indexing="ij")
        trip = np.stack([X[i, j].ravel(), X[j, k].ravel(), X[k, i].ravel()], axis=1)
        u, cnt = np.unique(trip, axis=0, return_counts=True)
        out.append(tuple((int(a), int(b), int(c), int(q % p)) for (a, b, c), q in zip(u, cnt) if q % p))
    return tuple(out)


def colored_intertwines(S, X, Y, p: int) -> bool:
    """True iff S 1[X == c] = 1[Y == c] S over F_p for every color c."""
    S = np.asarray(S, dtype=np.int64) % p
    n = S.shape[0]
    _, inv = np.unique(np.concatenate([np.ravel(X), np.ravel(Y)]), return_inverse=True)
    cx, cy = inv[:n * n].reshape(n, n), inv[n * n:].reshape(n, n)
    ncol = int(inv.max()) + 1
    a = np.arange(n)
    # (S M_c)[a, y] sums S[a, x] over x with X[x, y] = c; (N_c S)[a, y] sums S[a', y] over a' with Y[a, a'] = c
    k1 = (a[:, None, None] * ncol + cx[None, :, :]) * n + a[None, None, :]
    k2 = (a[:, None, None] * ncol + cy[:, :, None]) * n + a[None, None, :]
    w1 = np.broadcast_to(S[:, :, None], (n, n, n))
    w2 = np.broadcast_to(S[None, :, :], (n, n, n))
    size = n * ncol * n
    lhs = np.bincount(k1.ravel(), weights=w1.ravel(), minlength=size)
    rhs = np.bincount(k2.ravel(), weights=w2.ravel(), minlength=size)
    return not np.any(np.round(lhs - rhs).astype(np.int64) % p)


def colored_similarity(X, Y, p: int, rng=None, trials: int = DEFAULT_TRIALS,
                       exhaustive: int = DEFAULT_EXHAUSTIVE, traces: int = 2,
                       invariants: tuple | None = None) -> SimilarityVerdict:
    """Simultaneous similarity of the indicator families of two color matrices.

    ``invariants`` may carry precomputed ``(colored_invariants(X), colored_invariants(Y))``.
    """
    p = _check_prime(p)
    X = np.asarray(X, dtype=np.int64)
    Y = np.asarray(Y, dtype=np.int64)
    n = X.shape[0]
    if X.shape != Y.shape or X.shape != (n, n):
        raise UsageError("color matrices must be square of one common size")
    if n == 0:
        return SimilarityVerdict("similar", np.zeros((0, 0), dtype=np.int64), "empty")
    if np.array_equal(X, Y):
        return SimilarityVerdict("similar", np.eye(n, dtype=np.int64), "identical")
    ix, iy = invariants if invariants is not None else (colored_invariants(X, p, traces),
                                                        colored_invariants(Y, p, traces))
    if ix != iy:
        return SimilarityVerdict("not_similar", reason="invariant differs")
    space = colored_intertwiner_space(X, Y, p)
    if space.dim == 0:
        return SimilarityVerdict("not_similar", reason="intertwiner space is zero")
    res = find_invertible(space, rng, trials, exhaustive)
    colors = np.union1d(X, Y)
    if res.status == "found":
        S = res.matrix
        if not colored_intertwines(S, X, Y, p):
            raise InternalError("invertible intertwiner failed verification")
        return SimilarityVerdict("similar", S, "witness", {"dim": space.dim})
    if res.status == "not_found":
        return SimilarityVerdict("not_similar", reason="no invertible element (exhaustive)",
                                 detail={"dim": space.dim})
    dm = colored_intertwiner_space(X, X, p).dim
    dn = colored_intertwiner_space(Y, Y, p).dim
    if dm != space.dim or dn != space.dim:
        return SimilarityVerdict("not_similar", reason="Hom dimensions differ",
                                 detail={"hom": space.dim, "end_m": dm, "end_n": dn})
    return SimilarityVerdict("unknown", reason="search budget exhausted",
                             detail={"dim": space.dim, "trials": res.trials})
