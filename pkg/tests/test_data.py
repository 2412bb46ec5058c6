import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from famnet.data import (EMOTION_TABLES, Emotion, Manifest, ManifestEntry, UnknownLabelError,
                         encode_aus, expand_apex_neighbors, loso_folds, map_emotion)


@pytest.mark.parametrize("raw,dataset,expected", [
    ("happiness", "CASME II", Emotion.POSITIVE),
    ("disgust", "CASME II", Emotion.NEGATIVE),
    ("sadness", "casme2", Emotion.NEGATIVE),
    ("fear", "CAS(ME)^3", Emotion.NEGATIVE),
    ("surprise", "SAMM", Emotion.SURPRISE),
    ("contempt", "SAMM", Emotion.NEGATIVE),
    ("anger", "MMEW", Emotion.NEGATIVE),
    ("Happiness", "mmew", Emotion.POSITIVE),
])
def test_map_emotion(raw, dataset, expected):
    assert map_emotion(raw, dataset) is expected


@pytest.mark.parametrize("raw,dataset", [("others", "CASME II"), ("repression", "casme2"), ("others", "SAMM")])
def test_excluded_labels_signal_drop(raw, dataset):
    assert map_emotion(raw, dataset) is None


def test_unknown_label_rejected_with_names():
    with pytest.raises(UnknownLabelError, match="anger.*CASME II"):
        map_emotion("anger", "CASME II")


def test_unknown_dataset():
    with pytest.raises(ValueError, match="unsupported dataset"):
        map_emotion("happiness", "SMIC")


@pytest.mark.parametrize("dataset", sorted(EMOTION_TABLES))
def test_mapping_is_surjective(dataset):
    assert set(EMOTION_TABLES[dataset].values()) == set(Emotion)


def test_loso_three_subjects():
    folds = loso_folds(["B", "A", "C"])
    assert [set(f.test) for f in folds] == [{"A"}, {"B"}, {"C"}]
    assert folds[0].train == {"B", "C"}


def test_loso_single_subject_rejected():
    with pytest.raises(ValueError):
        loso_folds(["A"])


def _enumerate_folds_oracle(subjects):
    everyone = set(subjects)
    return {(frozenset(everyone - {s}), frozenset({s})) for s in everyone}


@given(st.sets(st.text(alphabet="abcdefgh", min_size=1, max_size=4), min_size=2, max_size=30))
def test_loso_partition_property(subjects):
    folds = loso_folds(list(subjects))
    assert len(folds) == len(subjects)
    for f in folds:
        assert not (f.train & f.test)
        assert f.train | f.test == subjects
    assert set().union(*(f.test for f in folds)) == subjects
    assert {(f.train, f.test) for f in folds} == _enumerate_folds_oracle(subjects)


def test_loso_26_subjects():
    subjects = [f"sub{i:02d}" for i in range(1, 27)]
    folds = loso_folds(subjects)
    assert len(folds) == 26
    assert set().union(*(f.test for f in folds)) == set(subjects)


@pytest.mark.parametrize("apex,expected", [
    (10, [7, 8, 9, 10, 11, 12, 13]),
    (1, [0, 1, 2, 3, 4, 5, 6]),
    (29, [23, 24, 25, 26, 27, 28, 29]),
])
def test_expand_apex_neighbors(apex, expected):
    assert expand_apex_neighbors(apex, 30) == expected


def test_expand_apex_short_sequence():
    with pytest.raises(ValueError):
        expand_apex_neighbors(3, 6)


@given(st.integers(7, 200).flatmap(lambda n: st.tuples(st.just(n), st.integers(0, n - 1))))
def test_expand_apex_neighbors_property(args):
    n, apex = args
    idx = expand_apex_neighbors(apex, n)
    assert len(set(idx)) == 7
    assert all(0 <= i < n for i in idx)
    assert apex in idx


def test_encode_aus():
    vocab = ("AU1", "AU2", "AU12")
    assert encode_aus(["AU12"], vocab).tolist() == [0, 0, 1]
    with pytest.raises(ValueError):
        encode_aus(["AU4"], vocab)


def test_manifest_roundtrip(tmp_path):
    clip = tmp_path / "s1" / "c0"
    clip.mkdir(parents=True)
    m = Manifest("casme2", ("AU1", "AU4"), (
        ManifestEntry(clip, "s1", "happiness", ("AU1",), 3),
        ManifestEntry(clip, "s2", "others", (), 2),
    ))
    path = m.write(tmp_path / "m.jsonl")
    lines = path.read_text().splitlines()
    assert json.loads(lines[0]) == {"dataset_id": "casme2", "au_vocabulary": ["AU1", "AU4"]}
    assert json.loads(lines[1])["clip_dir"] == "s1/c0"
    back = Manifest.read(path)
    assert back == m
    assert len(back.labelled()) == 1


def test_manifest_rejects_unknown_au(tmp_path):
    with pytest.raises(ValueError, match="outside the vocabulary"):
        Manifest("samm", ("AU1",), (ManifestEntry(tmp_path, "s1", "fear", ("AU9",), 0),))


def test_manifest_missing_clip_dir(tmp_path):
    (tmp_path / "m.jsonl").write_text(
        '{"dataset_id": "samm", "au_vocabulary": []}\n'
        '{"clip_dir": "nope", "subject": "1", "emotion_raw": "fear", "au_list": "", "apex_index": 0}\n')
    with pytest.raises(FileNotFoundError, match="nope"):
        Manifest.read(tmp_path / "m.jsonl")
