import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cohemark.semantic import (
    EmbeddingVector,
    MembershipIndex,
    MembershipVector,
    Sentence,
    join_sentences,
    membership_index,
    primary_cluster,
    prompt_seed_text,
    segment_sentences,
)


def texts(sentences):
    return [s.text for s in sentences]


class TestSegmentation:
    def test_two_terminal_periods(self):
        assert texts(segment_sentences("It rains. It pours.")) == ["It rains.", "It pours."]

    def test_empty_input(self):
        assert segment_sentences("") == []

    def test_abbreviations_do_not_split(self):
        assert texts(segment_sentences("Dr. Smith left. He ran.")) == [
            "Dr. Smith left.",
            "He ran.",
        ]
        assert texts(segment_sentences("See e.g. the U.S. report. Then decide.")) == [
            "See e.g. the U.S. report.",
            "Then decide.",
        ]

    def test_exclamations_and_questions(self):
        assert texts(segment_sentences("Wait! Really? Yes.")) == ["Wait!", "Really?", "Yes."]

    def test_no_terminal_punctuation_tail(self):
        assert texts(segment_sentences("First part. trailing words")) == [
            "First part.",
            "trailing words",
        ]

    def test_two_char_sentence_stands_alone(self):
        assert texts(segment_sentences("A. strange case here. Done.")) == [
            "A.",
            "strange case here.",
            "Done.",
        ]

    def test_short_fragment_merges_forward(self):
        assert texts(segment_sentences("Yes! ? Done.")) == ["Yes!", "? Done."]

    def test_trailing_fragment_merges_backward(self):
        assert texts(segment_sentences("What happened?! !")) == ["What happened?! !"]

    def test_indexes_are_sequential(self):
        sentences = segment_sentences("One. Two. Three.")
        assert [s.index for s in sentences] == [0, 1, 2]

    def test_whitespace_only_loss(self):
        raw = "  Spaced   out.\n\nNewlines too!   Ok?  "
        joined = join_sentences(segment_sentences(raw))
        assert "".join(raw.split()) == "".join(joined.split())

    @given(st.text(max_size=200))
    def test_only_whitespace_lost_property(self, raw):
        joined = join_sentences(segment_sentences(raw))
        assert "".join(raw.split()) == "".join(joined.split())

    @given(st.text(max_size=200))
    def test_idempotence(self, raw):
        once = segment_sentences(raw)
        twice = segment_sentences(join_sentences(once))
        assert texts(once) == texts(twice)

    @given(st.text(max_size=200))
    def test_determinism(self, raw):
        assert segment_sentences(raw) == segment_sentences(raw)


class TestSentenceType:
    def test_rejects_untrimmed(self):
        with pytest.raises(ValueError):
            Sentence(text=" padded ", index=0)

    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            Sentence(text="", index=0)


class TestEmbeddingVector:
    def test_rejects_non_unit(self):
        with pytest.raises(ValueError):
            EmbeddingVector(values=np.array([1.0, 1.0]))

    def test_accepts_unit(self):
        v = EmbeddingVector(values=np.array([0.6, 0.8]))
        assert v.dimension == 2


membership_degrees = st.lists(
    st.floats(min_value=0.01, max_value=1.0), min_size=2, max_size=12
).map(lambda xs: np.asarray(xs) / np.sum(xs))


class TestMembershipRanking:
    def test_four_cluster_example(self):
        mv = MembershipVector(degrees=np.array([0.15, 0.05, 0.5, 0.3]))
        assert membership_index(mv).ranking == (2, 3, 0, 1)

    def test_three_cluster_example(self):
        mv = MembershipVector(degrees=np.array([0.1, 0.7, 0.2]))
        assert membership_index(mv).ranking == (1, 2, 0)

    def test_uniform_tie_break(self):
        mv = MembershipVector(degrees=np.array([0.25, 0.25, 0.25, 0.25]))
        assert membership_index(mv).ranking == (0, 1, 2, 3)

    def test_primary_cluster_examples(self):
        assert primary_cluster(MembershipIndex(ranking=(2, 3, 0, 1))) == 2
        assert primary_cluster(MembershipIndex(ranking=(0, 1, 2, 3))) == 0
        assert primary_cluster(MembershipIndex(ranking=(7, 5, 1, 0, 3, 2, 6, 4))) == 7

    def test_invalid_permutation_rejected(self):
        with pytest.raises(ValueError):
            MembershipIndex(ranking=(0, 0, 1))

    @given(membership_degrees)
    def test_ranking_sorts_degrees_descending(self, degrees):
        mv = MembershipVector(degrees=degrees)
        ranked = [mv.degrees[j] for j in membership_index(mv).ranking]
        assert all(a >= b for a, b in zip(ranked, ranked[1:]))

    @given(membership_degrees)
    def test_primary_is_argmax_with_low_index_ties(self, degrees):
        mv = MembershipVector(degrees=degrees)
        assert primary_cluster(membership_index(mv)) == int(np.argmax(mv.degrees))

    @given(membership_degrees)
    def test_ranking_is_permutation(self, degrees):
        ranking = membership_index(MembershipVector(degrees=degrees)).ranking
        assert sorted(ranking) == list(range(len(degrees)))


class TestPromptSeedText:
    def test_whole_prompt_by_default(self):
        assert prompt_seed_text("One. Two.") == "One. Two."

    def test_tail_only(self):
        assert prompt_seed_text("One. Two.", tail_only=True) == "Two."

    def test_empty_prompt_rejected(self):
        with pytest.raises(ValueError):
            prompt_seed_text("   ")
