"""The example corpus: builders for every entry and the scenario list.

The JSON files under ``pcurv/corpus`` are generated from these builders
(``python -m pcurv.corpus``) and checked against them by the tests.
"""

from __future__ import annotations

import random
import sys
from fractions import Fraction
from importlib import resources
from pathlib import Path

from . import matrix as mx
from .connection import ConnectionRel, Derivation, GaugeMatrix, companion_from_operator, gauge_transform
from .io import dumps, serialize_operator
from .series import BiSeries, q, t

F = Fraction


def corpus_dir() -> Path:
    return Path(str(resources.files("pcurv") / "corpus"))


def rank_one(c) -> ConnectionRel:
    return ConnectionRel(mx.as_matrix([[BiSeries.coerce(c)]]))


def trivializable(g) -> ConnectionRel:
    """``A = -D(g) g^-1``, whose flat basis is ``g``."""
    gm = GaugeMatrix.of(g)
    a = mx.matscale(mx.matmul(mx.matmap(lambda x: x.D(), gm.matrix), gm.inverse), -1)
    return ConnectionRel(a)


def trivializable_rank2() -> ConnectionRel:
    return trivializable([[1, t()], [t(-1), 2]])


def hypergeometric(a, b, c) -> ConnectionRel:
    """``D(D + c - 1) - t(D + a)(D + b)`` along ``(1 - t) t d/dt``.

    Dividing the operator by ``1 - t`` gives the companion matrix with last
    column ``f_0, f_1``; along the scaled derivation its matrix is ``(1 - t)``
    times that, which is Laurent.
    """
    a, b, c = F(a), F(b), F(c)
    h = BiSeries.constant(1) - t()
    # (1 - t) D^2 y = (t (a + b) - (c - 1)) D y + t a b y
    f0 = t() * (a * b)
    f1 = t() * (a + b) - (c - 1)
    m = mx.as_matrix([[0, f0], [h, f1]])
    return ConnectionRel(m, Derivation("t_ddt", h))


def direct_sum_gauged() -> ConnectionRel:
    base = ConnectionRel(mx.as_matrix([[F(1, 2), 0], [0, F(1, 3)]]))
    return gauge_transform(base, GaugeMatrix.of([[1, t() + 2], [0, 1]]))


def nonintegral_witness() -> ConnectionRel:
    return companion_from_operator([BiSeries.from_dict({(2, -4): 1}), BiSeries.from_dict({(0, -1): 1})])


def planted_family(rank: int, M: int = 5, seed: int = 0, sign: int = 1, exact: bool = True) -> tuple[ConnectionRel, GaugeMatrix]:
    """``A = 0`` gauged by a product ``prod_m (I - q^m C_m)``.

    All t-exponents of the ``C_m`` have sign ``sign``; then the flat basis
    recovered by the reduction is exactly the inverse of the plant.  With
    ``exact`` (rank >= 2) the ``C_m`` are strictly upper triangular, so the
    plant has a finite inverse and the family is an exact connection.
    """
    rng = random.Random(seed)
    n = rank
    use_exact = exact and n >= 2
    prec = float("inf") if use_exact else M

    def entry(m):
        ks = rng.sample([1, 2, 3], rng.randint(1, 2))
        return BiSeries.from_dict({(sign * k, m): F(rng.randint(-3, 3) or 1, rng.choice([1, 1, 2])) for k in ks})

    p = mx.identity(n)
    for m in range(1, M):
        c = [[entry(m) if (j > i or not use_exact) else BiSeries.zero() for j in range(n)] for i in range(n)]
        factor = mx.matsub(mx.identity(n), mx.as_matrix(c))
        p = mx.matmul(p, factor)
        if prec != float("inf"):
            p = mx.truncate(p, prec)
    if prec != float("inf"):
        p = mx.truncate(p, prec)
    g = GaugeMatrix.of(p, tag="plant")
    zero = ConnectionRel(mx.zeros(n, prec=prec))
    return gauge_transform(zero, g), g


def planted_rank1_family(M: int = 5, seed: int = 0, q_prec: int = 16) -> tuple[ConnectionRel, GaugeMatrix]:
    """Rank-1 plant ``prod (1 - c_m q^m t^k_m)`` with ``A = D(P)/P`` kept to ``q^q_prec``."""
    rng = random.Random(seed)
    p = BiSeries.constant(1)
    for m in range(1, M):
        p = p * (BiSeries.constant(1) - BiSeries.from_dict({(rng.randint(1, 3), m): F(rng.choice([-2, -1, 1, 2]))}))
    p = p.truncate(q_prec)
    g = GaugeMatrix.of([[p]], tag="plant")
    zero = ConnectionRel(mx.zeros(1, prec=q_prec))
    return gauge_transform(zero, g), g


ENTRIES = {
    "rank1_zero": (lambda: rank_one(0), "A = 0", "trivial connection; psi_p = 0 and monodromy I"),
    "rank1_half": (lambda: rank_one(F(1, 2)), "A = [1/2]", "c^p = c in F_p; monodromy exp(-pi i) = -1, order 2"),
    "rank1_third": (lambda: rank_one(F(1, 3)), "A = [1/3]", "monodromy exp(-2 pi i/3), order 3"),
    "rank1_three_fifths": (lambda: rank_one(F(3, 5)), "A = [3/5]",
                           "vanishes for every p != 5; 5 is a bad prime"),
    "rank1_t": (lambda: rank_one(t()), "A = [t]", "psi_p = t^p for every p (rank-1 closed form)"),
    "trivializable_rank2": (trivializable_rank2, "A = -D(g) g^-1 with g = [[1, t], [1/t, 2]]",
                            "flat basis g; psi_p = 0 and monodromy I"),
    "hypergeometric_half_half_one": (lambda: hypergeometric(F(1, 2), F(1, 2), 1),
                                     "D(D + c - 1) - t(D + a)(D + b), a = b = 1/2, c = 1",
                                     "annihilates 2F1(1/2,1/2;1;t); p-curvature nonzero (brute-force oracle)"),
    "direct_sum_gauged": (direct_sum_gauged, "diag(1/2, 1/3) gauged by [[1, t + 2], [0, 1]]",
                          "monodromy eigenvalues -1 and exp(-2 pi i/3), order 6"),
    "nonintegral_witness": (nonintegral_witness, "companion of f_0 = q^-4 t^2, f_1 = q^-1",
                            "val_ell = -2, nu = 1; psi_5 nonzero"),
    "planted_rank2": (lambda: planted_family(2, 5, seed=11)[0], "A = 0 gauged by an exact unipotent plant",
                      "reduction recovers the inverse plant; monodromy I"),
    "planted_rank3": (lambda: planted_family(3, 5, seed=12)[0], "A = 0 gauged by an exact unipotent plant",
                      "reduction recovers the inverse plant; monodromy I"),
    "planted_rank1": (lambda: planted_rank1_family(5, seed=13)[0], "A = D(P)/P for a rank-1 plant, to q^16",
                      "reduction recovers 1/P; monodromy I up to q^16"),
    "orderjump_family": (lambda: rank_one(F(1, 2) + q() * F(1, 10)), "A = [1/2 + q/10]",
                         "order 2 at q = 0, exp(-2 pi i (1/2 + q/10)) not a root of unity at q = 0.3"),
    "congruence_cubic": (lambda: rank_one(F(1, 2) + q(3)), "A = [1/2 + q^3]",
                         "monodromy exp(-2 pi i (1/2 + q^3)); congruent to rank1_half mod q^3"),
    "congruence_residue_free": (lambda: rank_one(F(1, 2) + q(2) * (t() + t(-1))), "A = [1/2 + q^2 (t + 1/t)]",
                                "same monodromy as rank1_half: only the t^0 term matters"),
}

SCENARIOS = [
    ("check_rank1_half", "rank1_half", "check", {"primes_max": 50}, 0),
    ("check_rank1_three_fifths", "rank1_three_fifths", "check", {"primes_max": 200}, 0),
    ("check_rank1_t", "rank1_t", "check", {"primes_max": 20}, 2),
    ("check_trivializable", "trivializable_rank2", "check", {"primes_max": 30}, 0),
    ("check_hypergeometric", "hypergeometric_half_half_one", "check", {"primes_max": 30}, 2),
    ("check_witness", "nonintegral_witness", "check", {"primes_max": 7}, 2),
    ("reduce_planted_rank2", "planted_rank2", "reduce", {"q_order": 5, "primes_max": 7}, 0),
    ("reduce_planted_rank3", "planted_rank3", "reduce", {"q_order": 5, "primes_max": 7}, 0),
    ("reduce_planted_rank1", "planted_rank1", "reduce", {"q_order": 5, "primes_max": 7}, 0),
    ("reduce_rank1_half", "rank1_half", "reduce", {"q_order": 5, "primes_max": 7}, 0),
    ("reduce_rank1_t", "rank1_t", "reduce", {"q_order": 5}, 2),
    ("reduce_orderjump", "orderjump_family", "reduce", {"q_order": 5, "primes_max": 7}, 2),
    ("monodromy_rank1_half", "rank1_half", "monodromy", {}, 0),
    ("monodromy_rank1_third", "rank1_third", "monodromy", {}, 0),
    ("monodromy_trivializable", "trivializable_rank2", "monodromy", {}, 0),
    ("monodromy_direct_sum", "direct_sum_gauged", "monodromy", {}, 0),
    ("monodromy_planted_rank2", "planted_rank2", "monodromy",
     {"q_samples": ["0.05", "0.1"], "propagate": True}, 0),
    ("monodromy_planted_rank1", "planted_rank1", "monodromy",
     {"q_samples": ["0.05", "0.1"], "propagate": True}, 0),
    ("monodromy_orderjump", "orderjump_family", "monodromy",
     {"q_samples": ["0", "0.3"], "propagate": True}, 2),
]


def build_entry(name: str) -> ConnectionRel:
    return ENTRIES[name][0]()


def entry_bytes(name: str) -> bytes:
    _, desc, oracle = ENTRIES[name]
    return serialize_operator(build_entry(name), {"name": name, "description": desc, "oracle": oracle})


def scenario_doc(name, operator, command, params, expect) -> dict:
    return {"kind": "scenario", "format_version": 1, "name": name, "operator": f"../{operator}.json",
            "command": command, "params": params, "expect_exit": expect}


def write_corpus(root: Path | None = None) -> list[Path]:
    root = Path(root) if root else corpus_dir()
    (root / "scenarios").mkdir(parents=True, exist_ok=True)
    written = []
    for name in ENTRIES:
        path = root / f"{name}.json"
        path.write_bytes(entry_bytes(name))
        written.append(path)
    for sc in SCENARIOS:
        path = root / "scenarios" / f"{sc[0]}.json"
        path.write_text(dumps(scenario_doc(*sc)))
        written.append(path)
    return written


if __name__ == "__main__":
    for p in write_corpus(Path(sys.argv[1]) if len(sys.argv) > 1 else None):
        print(p)
