import numpy as np
import pytest

from cohemark.attacks import (
    AttackConfig,
    AttackRow,
    embedding_noise_attack,
    paraphrase_attack,
    paraphrase_prompt_template,
    perturb_embeddings,
    write_attack_csv,
)
from cohemark.detector import detect
from cohemark.errors import EmptyResponse, LmUnavailable
from cohemark.sampler import GenerationConfig, generate
from cohemark.synthcorpus import make_prompts

from stub_servers import StubServer, echo_paragraph_behavior, canned_text_behavior


@pytest.fixture(scope="module")
def record(model, nssc, embedder, mock_lm):
    prompt = make_prompts(1, seed=31)[0]
    return generate(
        prompt, model, nssc, GenerationConfig(max_sentences=12, seed=77), mock_lm, embedder
    )


class TestAttackConfig:
    def test_noise_requires_sigma(self):
        with pytest.raises(ValueError):
            AttackConfig(kind="embedding_noise")

    def test_noise_rejects_endpoint(self):
        with pytest.raises(ValueError):
            AttackConfig(kind="embedding_noise", noise_sigma=0.1, endpoint="http://x")

    def test_paraphrase_requires_endpoint(self):
        with pytest.raises(ValueError):
            AttackConfig(kind="paraphrase_remote")

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            AttackConfig(kind="mystery")


class TestParaphraseAttack:
    def test_request_carries_prefix_paragraph_and_instruction(self):
        captured = {}

        def recording(request):
            captured.update(request)
            return 200, {"text": "Rewritten output."}

        with StubServer({"/generate": recording}) as server:
            cfg = AttackConfig(kind="paraphrase_remote", endpoint=server.url)
            paraphrase_attack("The prefix text.", "The paragraph body.", cfg)
        assert "The prefix text." in captured["prompt"]
        assert "The paragraph body." in captured["prompt"]
        assert "do NOT change the primary information" in captured["prompt"]
        assert captured["temperature"] == 0.9
        assert captured["repetition_penalty"] == 1.05

    def test_template_has_two_slots(self):
        template = paraphrase_prompt_template()
        rendered = template.format("PFX", "PARA")
        assert "PFX" in rendered and "PARA" in rendered

    def test_empty_response_raises(self):
        with StubServer({"/generate": canned_text_behavior("  ")}) as server:
            cfg = AttackConfig(kind="paraphrase_remote", endpoint=server.url)
            with pytest.raises(EmptyResponse):
                paraphrase_attack("prefix.", "text.", cfg)

    def test_unreachable_raises(self):
        cfg = AttackConfig(kind="paraphrase_remote", endpoint="http://127.0.0.1:9")
        with pytest.raises(LmUnavailable):
            paraphrase_attack("prefix.", "text.", cfg, retries=1)

    def test_identity_stub_leaves_ratio_unchanged(self, record, model, nssc, embedder):
        with StubServer({"/generate": echo_paragraph_behavior()}) as server:
            cfg = AttackConfig(kind="paraphrase_remote", endpoint=server.url)
            attacked = paraphrase_attack(record.prompt, record.text, cfg)
        assert attacked == record.text
        before = detect(record.text, model, nssc, 0.5, embedder, prompt=record.prompt)
        after = detect(attacked, model, nssc, 0.5, embedder, prompt=record.prompt)
        assert after == before


class TestPerturbEmbeddings:
    def test_zero_sigma_returns_input_object(self):
        matrix = np.eye(3)
        assert perturb_embeddings(matrix, 0.0, seed=1) is matrix

    def test_rows_unit_norm(self):
        rng = np.random.default_rng(0)
        matrix = rng.normal(size=(5, 16))
        matrix /= np.linalg.norm(matrix, axis=1, keepdims=True)
        noisy = perturb_embeddings(matrix, 0.3, seed=2)
        assert np.allclose(np.linalg.norm(noisy, axis=1), 1.0, atol=1e-12)

    def test_seeded_determinism(self):
        matrix = np.eye(4)
        a = perturb_embeddings(matrix, 0.5, seed=9)
        b = perturb_embeddings(matrix, 0.5, seed=9)
        assert np.array_equal(a, b)

    def test_negative_sigma_rejected(self):
        with pytest.raises(ValueError):
            perturb_embeddings(np.eye(2), -0.1, seed=0)


class TestEmbeddingNoiseAttack:
    def test_zero_sigma_matches_clean_detection_field_for_field(
        self, record, model, nssc, embedder
    ):
        clean = detect(record.text, model, nssc, 0.5, embedder, prompt=record.prompt)
        attacked = embedding_noise_attack(record, 0.0, 3, model, nssc, embedder, threshold=0.5)
        assert attacked == clean
        assert attacked.ratio == 1.0

    def test_seeded_determinism(self, record, model, nssc, embedder):
        a = embedding_noise_attack(record, 0.4, 11, model, nssc, embedder)
        b = embedding_noise_attack(record, 0.4, 11, model, nssc, embedder)
        assert a == b

    def test_large_sigma_degrades_ratio(self, record, model, nssc, embedder):
        ratios = [
            embedding_noise_attack(record, 10.0, seed, model, nssc, embedder).ratio
            for seed in range(20)
        ]
        assert float(np.mean(ratios)) < 0.6


class TestAttackCsv:
    def test_layout(self, tmp_path):
        rows = [AttackRow("0", "embedding_noise", "0.1", 1.0, 0.75)]
        path = tmp_path / "attack.csv"
        write_attack_csv(rows, path)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "text_id,kind,sigma_or_model,r_before,r_after"
        assert lines[1] == "0,embedding_noise,0.1,1.0,0.75"
