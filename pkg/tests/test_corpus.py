import logging

import pytest

from BugPrio.Corpus import (
    BugReport,
    CorpusFile,
    composeText,
    filterLabeled,
    labelHistogram,
    loadCorpus,
    parseReport,
    saveCorpus,
    splitDataset,
)
from BugPrio.Warning import CorpusError

from conftest import writeJsonl


def reports(n, labeled=True):
    return [BugReport(str(i), "summary %d" % i, "", "P3" if labeled else None) for i in range(n)]


class TestLoadCorpus:
    def test_three_valid_lines(self, tmp_path):
        path = writeJsonl(tmp_path / "c.jsonl", [
            {"id": "a", "summary": "crash on start", "description": "trace", "priority": "P1"},
            {"id": 7, "summary": "typo", "priority": "P4"},
            {"id": "c", "summary": "idea", "description": None},
        ])
        loaded = loadCorpus(path)
        assert [r.id for r in loaded] == ["a", "7", "c"]
        assert loaded[1].description == ""
        assert loaded[2].priority is None
        assert loaded[0].label == 0

    def test_blank_lines_are_skipped(self, tmp_path):
        path = writeJsonl(tmp_path / "c.jsonl", [{"id": "a", "summary": "x"}, "", "   "])
        assert len(loadCorpus(path)) == 1

    def test_unknown_priority_names_line_and_label(self, tmp_path):
        path = writeJsonl(tmp_path / "c.jsonl", [
            {"id": "a", "summary": "x", "priority": "P1"},
            {"id": "b", "summary": "y", "priority": "P6"},
        ])
        with pytest.raises(CorpusError) as info:
            loadCorpus(path)
        assert len(info.value.problems) == 1
        lineNo, message = info.value.problems[0]
        assert lineNo == 2
        assert "P6" in message
        assert "line 2: unknown priority label 'P6'" in str(info.value)

    def test_all_problems_collected(self, tmp_path):
        path = writeJsonl(tmp_path / "c.jsonl", [
            "{not json",
            {"id": "", "summary": "x"},
            {"id": "b", "summary": "  "},
            {"id": "c", "summary": "ok", "description": 5},
            {"id": "d", "summary": "fine"},
        ])
        corpus = CorpusFile(path)
        assert [n for n, _ in corpus.errors] == [1, 2, 3, 4]
        assert [r.id for r in corpus.reports] == ["d"]

    def test_invalid_utf8_line(self, tmp_path):
        path = tmp_path / "c.jsonl"
        path.write_bytes(
            b'{"id": "a", "summary": "first"}\n'
            b'{"id": "b", "summary": "bad \xff byte"}\n'
            b'{"id": "c", "summary": "third"}\n'
        )
        corpus = CorpusFile(str(path))
        assert [r.id for r in corpus.reports] == ["a", "c"]
        assert len(corpus.errors) == 1
        assert corpus.errors[0][0] == 2
        assert "UTF-8" in corpus.errors[0][1]
        with pytest.raises(CorpusError, match="line 2: not valid UTF-8"):
            loadCorpus(str(path))

    def test_lenient_mode_keeps_valid_records(self, tmp_path, caplog):
        path = writeJsonl(tmp_path / "c.jsonl", [{"id": "a", "summary": "x", "priority": "P9"}, {"id": "b", "summary": "y"}])
        with caplog.at_level(logging.WARNING):
            loaded = loadCorpus(path, strict=False)
        assert [r.id for r in loaded] == ["b"]
        assert "P9" in caplog.text

    def test_duplicate_ids(self, tmp_path):
        path = writeJsonl(tmp_path / "c.jsonl", [{"id": "a", "summary": "x"}, {"id": "a", "summary": "y"}])
        with pytest.raises(CorpusError, match="duplicate"):
            loadCorpus(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(CorpusError):
            loadCorpus(str(tmp_path / "absent.jsonl"))

    def test_save_then_load(self, tmp_path, corpus):
        path = str(tmp_path / "out.jsonl")
        saveCorpus(corpus, path)
        assert loadCorpus(path) == corpus


class TestParseReport:
    def test_id_is_optional(self):
        report = parseReport('{"summary": "crash", "description": "boom"}')
        assert report.summary == "crash"
        assert report.priority is None

    def test_invalid_record(self):
        with pytest.raises(CorpusError):
            parseReport('{"description": "no summary"}')


class TestComposeText:
    def test_summary_and_description(self):
        assert composeText(BugReport("1", "A", "B")) == "A B"

    def test_empty_description(self):
        assert composeText(BugReport("1", "A", "")) == "A"

    def test_no_normalization(self):
        text = composeText(BugReport("1", "Pasting code with JUnit asserts", "  assertTrue(x);\n"))
        assert text.startswith("Pasting code with JUnit asserts")
        assert text.endswith("  assertTrue(x);\n")


class TestSplitDataset:
    @pytest.mark.parametrize("n, sizes", [(10, (8, 1, 1)), (15, (12, 1, 2)), (100, (80, 10, 10)), (101, (80, 10, 11))])
    def test_sizes(self, n, sizes):
        split = splitDataset(reports(n), seed=5)
        assert (len(split.train), len(split.valid), len(split.test)) == sizes

    def test_disjoint_and_covering(self):
        items = reports(57)
        split = splitDataset(items, seed=1)
        ids = [r.id for r in split.train + split.valid + split.test]
        assert sorted(ids) == sorted(r.id for r in items)
        assert len(set(ids)) == len(ids)

    def test_same_seed_same_split(self):
        items = reports(40)
        assert splitDataset(items, 9) == splitDataset(items, 9)

    def test_different_seed_different_split(self):
        items = reports(40)
        assert splitDataset(items, 1).train != splitDataset(items, 2).train

    def test_too_few_reports(self):
        with pytest.raises(CorpusError, match="at least 10"):
            splitDataset(reports(9), seed=0)


class TestFilterLabeled:
    def test_drops_unlabeled_keeping_order(self):
        items = [
            BugReport("1", "a", "", "P1"),
            BugReport("2", "b"),
            BugReport("3", "c", "", "P5"),
            BugReport("4", "d"),
            BugReport("5", "e", "", "P2"),
        ]
        assert [r.id for r in filterLabeled(items)] == ["1", "3", "5"]

    def test_all_unlabeled_warns(self, caplog):
        with caplog.at_level(logging.WARNING):
            assert filterLabeled(reports(3, labeled=False)) == []
        assert "no labeled reports" in caplog.text


class TestLabelHistogram:
    def test_counts(self):
        items = [BugReport("1", "a", "", "P1"), BugReport("2", "b", "", "P1"), BugReport("3", "c", "", "P3")]
        histogram = labelHistogram(items)
        assert histogram.counts == {"P1": 2, "P2": 0, "P3": 1, "P4": 0, "P5": 0}
        assert histogram.total == 3

    def test_empty(self):
        assert labelHistogram([]).counts == {p: 0 for p in ("P1", "P2", "P3", "P4", "P5")}

    def test_unlabeled_not_counted(self):
        assert labelHistogram(reports(4, labeled=False)).total == 0
