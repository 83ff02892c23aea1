import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cohemark.detector import (
    DetectionResult,
    Verdict,
    calibrate_threshold,
    detect,
    evaluate,
    replay_memberships,
    result_from_replay,
    write_roc_csv,
)
from cohemark.errors import EmbedderMismatch, EmptyInput
from cohemark.sampler import GenerationConfig, generate
from cohemark.semantic import MembershipVector
from cohemark.synthcorpus import make_null_text, make_prompts

from oracle_null import simulate_null_ratio_mean


def ranked_mv(ranking):
    """Membership vector whose descending-degree order equals ``ranking``."""
    k = len(ranking)
    degrees = np.zeros(k)
    for position, cluster in enumerate(ranking):
        degrees[cluster] = k - position
    return MembershipVector(degrees=degrees / degrees.sum())


def chain_with_hits(pattern):
    """Build a membership chain whose per-transition hits follow ``pattern``.

    Hits are arranged through the rank-2 cluster so primaries never repeat
    and the state machine stays in the base rule throughout.
    """
    k = 8
    rankings = [tuple(range(k))]
    for want_hit in pattern:
        prev = rankings[-1]
        primary = prev[2] if want_hit else prev[1]
        rest = [c for c in range(k) if c != primary]
        rankings.append((primary, *rest))
    return [ranked_mv(r) for r in rankings]


class TestReplay:
    def test_exact_hit_pattern(self, nssc):
        pattern = [1, 1, 0, 1, 1, 1, 0, 1, 1, 1]
        hits, scored, trace = replay_memberships(chain_with_hits(pattern), nssc)
        assert scored == 10
        assert hits == 8
        assert [t.hit for t in trace] == [bool(p) for p in pattern]

    def test_ratio_is_exact_division(self, nssc):
        hits, scored, trace = replay_memberships(chain_with_hits([1, 1, 0, 1, 1, 1, 0, 1, 1, 1]), nssc)
        result = result_from_replay(hits, scored, trace, threshold=0.5)
        assert result.ratio == 0.8
        assert result.ratio == result.green_count / result.scored_count

    def test_short_chain_scores_nothing(self, nssc):
        hits, scored, trace = replay_memberships([ranked_mv(tuple(range(8)))], nssc)
        assert (hits, scored, trace) == (0, 0, ())


class TestDetect:
    def test_replay_exactness_with_prompt(self, model, nssc, embedder, mock_lm):
        for i, prompt in enumerate(make_prompts(5, seed=21)):
            record = generate(
                prompt, model, nssc, GenerationConfig(max_sentences=10, seed=50 + i),
                mock_lm, embedder,
            )
            result = detect(record.text, model, nssc, 0.9, embedder, prompt=record.prompt)
            assert result.ratio == 1.0
            assert result.green_count == result.scored_count == 10
            assert result.verdict is Verdict.WATERMARKED

    def test_prompt_free_scores_one_less(self, model, nssc, embedder, pool):
        text = make_null_text(pool, 10, np.random.default_rng(0))
        without = detect(text, model, nssc, 0.5, embedder)
        assert without.scored_count == 9
        with_prompt = detect(text, model, nssc, 0.5, embedder, prompt="Celestial astral comet outshines silent starlight observatory.")
        assert with_prompt.scored_count == 10

    def test_too_short_is_undecidable(self, model, nssc, embedder):
        result = detect("Just one sentence here.", model, nssc, 0.5, embedder)
        assert result.verdict is Verdict.UNDECIDABLE
        assert result.scored_count == 0

    def test_min_scored_boundary(self, model, nssc, embedder, pool):
        text = make_null_text(pool, 3, np.random.default_rng(1))
        result = detect(text, model, nssc, 1.1, embedder)
        assert result.scored_count == 2
        assert result.verdict is Verdict.UNDECIDABLE
        result = detect(text, model, nssc, 1.1, embedder, min_scored=2)
        assert result.verdict is Verdict.CLEAN

    def test_embedder_mismatch(self, model, nssc):
        from cohemark.embedder import HashEmbedder

        other = HashEmbedder(dimension=64, seed=12345)
        with pytest.raises(EmbedderMismatch):
            detect("Some text. More text.", model, nssc, 0.5, other)

    def test_z_score_telemetry(self, model, nssc, embedder, pool):
        text = make_null_text(pool, 8, np.random.default_rng(2))
        result = detect(text, model, nssc, 0.5, embedder, null_hit_rate=0.25)
        expected = (result.green_count - 0.25 * result.scored_count) / np.sqrt(
            result.scored_count * 0.25 * 0.75
        )
        assert result.z_score == pytest.approx(expected)

    def test_json_report_shape(self, model, nssc, embedder, pool):
        text = make_null_text(pool, 6, np.random.default_rng(3))
        payload = detect(text, model, nssc, 0.5, embedder).to_json_dict()
        assert set(payload) >= {"ratio", "s_v", "s_t", "threshold", "verdict", "trace"}
        assert len(payload["trace"]) == payload["s_t"]
        for row in payload["trace"]:
            assert set(row) == {"primary", "green", "mode", "hit"}


class TestNullOracle:
    def test_replay_matches_monte_carlo(self, nssc):
        rng = np.random.default_rng(77)
        scored = 19
        ratios = []
        for _ in range(400):
            rankings = [tuple(rng.permutation(8)) for _ in range(scored + 1)]
            hits, n, _ = replay_memberships([ranked_mv(r) for r in rankings], nssc)
            ratios.append(hits / n)
        oracle = simulate_null_ratio_mean(30_000, scored, seed=5)
        assert abs(float(np.mean(ratios)) - oracle) < 0.03


class TestCalibrate:
    def test_degenerate_distribution(self):
        with pytest.warns(UserWarning):
            report = calibrate_threshold([0.2] * 50, 0.01)
        assert report.threshold == np.nextafter(0.2, np.inf)
        assert sum(s >= report.threshold for s in [0.2] * 50) == 0

    def test_ten_value_quantile(self):
        scores = [i / 10 for i in range(10)]
        with pytest.warns(UserWarning):
            report = calibrate_threshold(scores, 0.10)
        assert report.threshold > 0.8
        assert sum(s >= report.threshold for s in scores) <= 1

    def test_two_sample_calibration(self, nssc):
        rng = np.random.default_rng(8)

        def sample_scores(n, seed):
            r = np.random.default_rng(seed)
            out = []
            for _ in range(n):
                rankings = [tuple(r.permutation(8)) for _ in range(16)]
                hits, scored, _ = replay_memberships([ranked_mv(x) for x in rankings], nssc)
                out.append(hits / scored)
            return out

        calib = sample_scores(400, 1)
        held_out = sample_scores(400, 2)
        report = calibrate_threshold(calib, 0.01)
        empirical = np.mean([s >= report.threshold for s in held_out])
        assert empirical <= 0.02

    def test_empty_input(self):
        with pytest.raises(EmptyInput):
            calibrate_threshold([], 0.01)

    def test_bad_fpr(self):
        with pytest.raises(ValueError):
            calibrate_threshold([0.5], 1.5)

    def test_small_sample_warns(self):
        with pytest.warns(UserWarning):
            calibrate_threshold([0.1, 0.2, 0.3], 0.5)

    @settings(max_examples=40)
    @given(
        st.lists(st.floats(min_value=0, max_value=1), min_size=5, max_size=200),
        st.floats(min_value=0.01, max_value=0.4),
        st.floats(min_value=0.01, max_value=0.5),
    )
    def test_threshold_monotone_in_fpr(self, scores, fpr, bump):
        import warnings

        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            low = calibrate_threshold(scores, fpr).threshold
            high = calibrate_threshold(scores, min(0.99, fpr + bump)).threshold
        assert high <= low

    @settings(max_examples=40)
    @given(
        st.lists(st.floats(min_value=0, max_value=1), min_size=10, max_size=200),
        st.floats(min_value=0.01, max_value=0.3),
    )
    def test_empirical_fpr_within_target(self, scores, fpr):
        import warnings

        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            report = calibrate_threshold(scores, fpr)
        assert np.mean([s >= report.threshold for s in scores]) <= fpr


class TestEvaluate:
    def test_separated_distributions(self):
        result = evaluate([1.0] * 40, [0.25] * 200, 0.01)
        assert result.tpr_at_fpr == 1.0

    def test_identical_distributions_near_chance(self):
        rng = np.random.default_rng(4)
        scores = list(rng.random(500))
        result = evaluate(scores, scores, 0.01)
        assert result.tpr_at_fpr <= 0.012

    def test_empty_inputs(self):
        with pytest.raises(EmptyInput):
            evaluate([], [0.5], 0.01)
        with pytest.raises(EmptyInput):
            evaluate([0.5], [], 0.01)

    def test_roc_csv(self, tmp_path):
        result = evaluate([0.9, 1.0], [0.1, 0.2, 0.3], 0.1)
        path = tmp_path / "roc.csv"
        write_roc_csv(result, path)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "fpr,tpr,threshold"
        assert len(lines) == len(result.roc) + 1


class TestResultInvariants:
    def test_green_cannot_exceed_scored(self):
        with pytest.raises(ValueError):
            DetectionResult(
                green_count=5,
                scored_count=3,
                ratio=1.0,
                threshold=0.5,
                verdict=Verdict.WATERMARKED,
                trace=(),
            )
