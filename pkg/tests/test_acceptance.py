"""Acceptance gate: one test per headline capability, each printing a
PASS/FAIL line with the measured numbers.

Statistical checks use pinned seeds so the suite is deterministic.  Set
DRAW_ACCEPTANCE_SCALE=full to run the large-sample variants where a
smaller desk-scale run is used by default.
"""

import json
import math
import os
from collections import Counter
from fractions import Fraction

import numpy as np
import pytest
from scipy.stats import chisquare

from conftest import assignment_key, make_toy_config
from oracle_laws import sequential_law
from groupdraw.cli import main
from groupdraw.feasibility import count_completions
from groupdraw.model import PartialDraw, motivating_preset, wc2022_preset
from groupdraw.multiball import allocate_balls, m_tail
from groupdraw.rng import RngStream
from groupdraw.samplers import complete_uniform_batch
from groupdraw.stats import gof_against_oracle, make_sampler
from test_multiball import _weights

FULL = os.environ.get("DRAW_ACCEPTANCE_SCALE", "desk") == "full"

WC2022_VALID_DRAWS = 620_806_975_488_000
WC2022_FREE_SPACE = 330_363_536_670_720_000  # 7! * (8!)^3
EXACT_RATE = WC2022_FREE_SPACE / WC2022_VALID_DRAWS  # 532.1518...


def report(name, ok, detail):
    print(f"[ACCEPTANCE] {name}: {'PASS' if ok else 'FAIL'} ({detail})",
          flush=True)


@pytest.fixture(scope="module")
def wc2022():
    return wc2022_preset()


@pytest.fixture(scope="module")
def rate_measurement(wc2022):
    """Mean proposals-per-accept over 10^6 uniform draws, chunked."""
    chunk = 100_000
    rates = []
    for i in range(10):
        _, proposals = complete_uniform_batch(
            wc2022, None, chunk, RngStream(2, i)
        )
        rates.append(proposals / chunk)
    rates = np.array(rates)
    mean = float(rates.mean())
    # standard error of the grand mean from the chunk means
    se = float(rates.std(ddof=1) / math.sqrt(len(rates)))
    return mean, se


def test_acceptance_rate_near_560(rate_measurement):
    mean, _ = rate_measurement
    ok = 0.95 * 560 <= mean <= 1.05 * 560
    report("acceptance-rate", ok,
           f"mean proposals/accept {mean:.2f}, window [532.0, 588.0]")
    assert ok


def test_exact_count_matches_measured_rate(wc2022, rate_measurement):
    valid = count_completions(wc2022, PartialDraw.initial(wc2022))
    assert valid == WC2022_VALID_DRAWS
    mean, se = rate_measurement
    half = 3.2498 * se  # t(9) two-sided 99%
    ok = mean - half <= EXACT_RATE <= mean + half
    report("exact-count-vs-rate", ok,
           f"exact {EXACT_RATE:.4f} in 99% CI "
           f"[{mean - half:.2f}, {mean + half:.2f}]")
    assert ok


@pytest.mark.xfail(
    strict=True,
    reason="exact count is 5.22% above 5.9e14, outside the 3% window",
)
def test_exact_count_near_rounded_figure(wc2022):
    valid = count_completions(wc2022, PartialDraw.initial(wc2022))
    rel = abs(valid - 5.9e14) / 5.9e14
    report("exact-count-approx", rel <= 0.03,
           f"count {valid:,} is {rel:.2%} from 5.9e14, tolerance 3%")
    assert rel <= 0.03


BIAS_PAIRS = (
    ("England", "Germany"),
    ("Germany", "Qatar"),
    ("Canada", "Qatar"),
    ("USA", "Qatar"),
)
BIAS_TABLE = {  # percent probabilities under uniform / sequential draw
    "rejection": (10.53, 13.74, 15.53, 9.06),
    "fifa": (11.78, 12.50, 16.51, 12.50),
}


@pytest.mark.parametrize("method", ["rejection", "fifa"])
def test_bias_table(wc2022, method):
    n = 1_000_000 if FULL else 100_000
    tol_pp = 0.15 if FULL else 0.5
    seed = {"rejection": 2, "fifa": 0}[method]
    idx = wc2022.index
    sampler = make_sampler(wc2022, method)
    hits = np.zeros(len(BIAS_PAIRS), dtype=np.int64)
    done = 0
    chunk_i = 0
    while done < n:
        m = min(1 << 15, n - done)
        rows = sampler(m, RngStream(seed, chunk_i))
        for j, (a, b) in enumerate(BIAS_PAIRS):
            hits[j] += np.count_nonzero(
                rows[:, idx.team_id[a]] == rows[:, idx.team_id[b]]
            )
        done += m
        chunk_i += 1
    ok = True
    details = []
    for j, ref_pp in enumerate(BIAS_TABLE[method]):
        p = hits[j] / n
        ci_pp = 1.96 * math.sqrt(p * (1 - p) / n) * 100
        est_pp = p * 100
        good = (
            abs(est_pp - ref_pp) <= tol_pp and abs(est_pp - ref_pp) <= ci_pp
        )
        ok = ok and good
        details.append(
            f"{BIAS_PAIRS[j][0]}-{BIAS_PAIRS[j][1]} "
            f"{est_pp:.3f}% vs {ref_pp}%"
        )
    report(f"bias-table[{method}]", ok,
           f"n={n}, tol ±{tol_pp}pp: " + "; ".join(details))
    assert ok


ALPHA = 0.001
LAW_REPS = 100_000


def _law_check(config, law, method_opts, seed):
    sampler = make_sampler(config, "fifa", **method_opts)
    from groupdraw.stats import _row_of
    from groupdraw.feasibility import enumerate_valid

    keys = []
    expected = []
    index_of = {}
    for a in enumerate_valid(config):
        k = assignment_key(a)
        index_of[_row_of(a).tobytes()] = len(keys)
        keys.append(k)
        expected.append(float(law.get(k, 0)) * LAW_REPS)
    observed = np.zeros(len(keys))
    done = 0
    chunk_i = 0
    while done < LAW_REPS:
        m = min(1 << 15, LAW_REPS - done)
        for row in sampler(m, RngStream(seed, chunk_i)):
            observed[index_of[row.tobytes()]] += 1
        done += m
        chunk_i += 1
    # drop zero-probability outcomes (observing one is an instant fail)
    assert all(o == 0 for o, e in zip(observed, expected) if e == 0)
    obs = [o for o, e in zip(observed, expected) if e > 0]
    exp = [e for e in expected if e > 0]
    stat, p = chisquare(obs, f_exp=exp)
    return float(p)


def test_sequential_law_motivating():
    config = motivating_preset()
    law = sequential_law(config)
    assert sorted(law.values()) == [
        Fraction(1, 6), Fraction(1, 6), Fraction(1, 3), Fraction(1, 3),
    ]
    p = _law_check(config, law, {}, seed=2)
    report("law[motivating,lexicographic]", p > ALPHA,
           f"chi2 p={p:.4f} vs (1/3,1/3,1/6,1/6), alpha={ALPHA}")
    assert p > ALPHA


def test_sequential_law_modified_lexicographic_uniform():
    config = motivating_preset(modified=True)
    law = sequential_law(config)
    assert set(law.values()) == {Fraction(1, 3)}
    p = _law_check(config, law, {}, seed=3)
    report("law[modified,lexicographic]", p > ALPHA,
           f"chi2 p={p:.4f} vs uniform on 3 draws, alpha={ALPHA}")
    assert p > ALPHA


def test_sequential_law_modified_uniform_random():
    config = motivating_preset(modified=True)
    law = sequential_law(config, "uniform_random")
    assert sorted(law.values()) == [
        Fraction(5, 18), Fraction(13, 36), Fraction(13, 36),
    ]
    p = _law_check(config, law, {"policy": "uniform_random"}, seed=4)
    report("law[modified,uniform_random]", p > ALPHA,
           f"chi2 p={p:.4f} vs (5/18,13/36,13/36), alpha={ALPHA}")
    assert p > ALPHA


CORRECTION_CELLS = [
    ("metropolis", {"k": 1}),
    ("metropolis", {"k": 20}),
    ("multiball", {"n_est": 1}),
    ("multiball", {"n_est": 100}),
    ("multirej", {}),
]


def _correction_config(name):
    if name == "motivating":
        return motivating_preset()
    return make_toy_config(int(name))


@pytest.mark.parametrize("config_name", ["motivating", "101", "202"])
@pytest.mark.parametrize("method,opts", CORRECTION_CELLS)
def test_corrections_uniform(config_name, method, opts):
    config = _correction_config(config_name)
    seed = 5 + hashable_seed(config_name, method, opts)
    res = gof_against_oracle(config, method, LAW_REPS, seed, **opts)
    ok = res.p_value > ALPHA
    report(f"uniform[{config_name},{method},{opts}]", ok,
           f"chi2 p={res.p_value:.4f}, tv={res.tv_distance:.4f}, "
           f"alpha={ALPHA}")
    assert ok


def hashable_seed(config_name, method, opts) -> int:
    key = f"{config_name}|{method}|{sorted(opts.items())}"
    return sum(ord(c) * (i + 1) for i, c in enumerate(key)) % 1000


def test_stratified_allocation_properties():
    # worked fixture: weights (0.24, 0.29, 0.47)
    w = _weights([("A", Fraction(24, 100)),
                  ("B", Fraction(29, 100)),
                  ("C", Fraction(47, 100))])
    alloc = allocate_balls(w, rng=RngStream(6))
    fixture_ok = (
        alloc.m_total == 5
        and alloc.r == (Fraction(6, 5), Fraction(29, 20), Fraction(47, 20))
        and alloc.a == (1, 1, 2)
        and alloc.k == 1
    )
    # uncapped total for estimated counts (3, 36, 61) of 100
    w2 = _weights([("A", Fraction(3, 100)),
                   ("B", Fraction(36, 100)),
                   ("C", Fraction(61, 100))])
    alloc2 = allocate_balls(w2, m_max=None, rng=RngStream(6))
    fixture_ok = fixture_ok and alloc2.m_total == 34

    gen = np.random.default_rng(7)
    rng = np.random.default_rng(8)
    fuzz_ok = True
    for _ in range(10_000):
        j = int(gen.integers(2, 6))
        raw = [int(x) for x in gen.integers(0, 30, size=j)]
        if sum(raw) == 0:
            raw[0] = 1
        total = sum(raw)
        est = _weights(
            [(f"T{i}", Fraction(c, total)) for i, c in enumerate(raw)],
            n=total,
        )
        capped = bool(gen.random() < 0.5)
        alloc = allocate_balls(
            est, m_max=20 if capped else None, gcd_reduce=False, rng=rng
        )
        fuzz_ok = fuzz_ok and sum(alloc.m) == alloc.m_total
        fuzz_ok = fuzz_ok and sum(alloc.b) == alloc.k
        fuzz_ok = fuzz_ok and all(b in (0, 1, 2) for b in alloc.b)
        if not capped:
            fuzz_ok = fuzz_ok and all(
                (m >= 1) == (x > 0) for m, x in zip(alloc.m, alloc.weights)
            )
    ok = fixture_ok and fuzz_ok
    report("stratified-allocation", ok,
           f"fixtures M=5/a=(1,1,2) and M=34: {fixture_ok}; "
           f"10^4 fuzzed invariants: {fuzz_ok}")
    assert ok


M_WEIGHTS = (Fraction(1, 4), Fraction(1, 4), Fraction(1, 2))


def test_m_distribution_tail_n100():
    _, greater = m_tail(M_WEIGHTS, 100, 6)
    ok = float(greater) == pytest.approx(0.042171446299991436, rel=1e-12)
    report("m-tail[n=100]", ok, f"P(M>6) = {float(greater):.10g}")
    assert ok


@pytest.mark.xfail(
    strict=True,
    reason="exact tail at n=1000 is 1.94e-10, above the 1e-11 target",
)
def test_m_distribution_tail_n1000():
    _, greater = m_tail(M_WEIGHTS, 1000, 6)
    ok = float(greater) < 1e-11
    report("m-tail[n=1000]", ok,
           f"P(M>6) = {float(greater):.10g}, target < 1e-11")
    assert ok


def _run_cli(capsys, *argv):
    code = 0
    try:
        main(list(argv))
    except SystemExit as exc:
        code = exc.code or 0
    out, _ = capsys.readouterr()
    return code, out


def test_cli_runs_reproduce_from_printed_seed(capsys):
    ok = True
    # a fresh-seed run, replayed with the seed it printed
    code, first = _run_cli(capsys, "simulate", "--preset", "motivating")
    assert code == 0
    seed = first.splitlines()[0].split(":")[1].strip()
    _, replay = _run_cli(
        capsys, "simulate", "--preset", "motivating", "--seed", seed
    )
    ok = ok and replay == first
    for argv in (
        ("simulate", "--preset", "wc2022", "--method", "multiball",
         "--n-est", "50", "--seed", "11", "--json"),
        ("compare", "--preset", "motivating", "--methods", "rejection,fifa",
         "--event", "same-group:Qatar,Uruguay", "--samples", "2000",
         "--seed", "12", "--threads", "1", "--json"),
        ("mdist", "--weights", "1/4,1/4,1/2", "--n", "100", "--tail-at", "6",
         "--seed", "13", "--json"),
    ):
        _, a = _run_cli(capsys, *argv)
        _, b = _run_cli(capsys, *argv)
        ok = ok and a == b and json.loads(a)
    report("cli-reproducibility", ok, "byte-identical reruns with seeds")
    assert ok
