import pytest
from hypothesis import given
from hypothesis import strategies as st

from nutpipe import Collect, CsvConfig, FlowError, MapCol, ReadCSV, WriteCSV


def write(path, text):
    path.write_bytes(text.encode("utf-8"))
    return path


def test_read_records(tmp_path):
    path = write(tmp_path / "data.csv", "image1.png,plane\nimage2.png,car")
    assert ReadCSV(path) >> Collect() == [("image1.png", "plane"), ("image2.png", "car")]


def test_empty_file(tmp_path):
    assert ReadCSV(write(tmp_path / "e.csv", "")) >> Collect() == []


def test_quoted_delimiter(tmp_path):
    path = write(tmp_path / "q.csv", '"a,b",c\n')
    assert ReadCSV(path) >> Collect() == [("a,b", "c")]


def test_crlf_and_header(tmp_path):
    path = write(tmp_path / "h.csv", "name,label\r\nx,1\r\ny,2\r\n")
    assert ReadCSV(path, CsvConfig(has_header=True)) >> Collect() == [("x", "1"), ("y", "2")]


def test_other_delimiter(tmp_path):
    path = write(tmp_path / "t.csv", "a;b\n")
    assert ReadCSV(path, CsvConfig(delimiter=";")) >> Collect() == [("a", "b")]


def test_fields_stay_text(tmp_path):
    path = write(tmp_path / "n.csv", "1,2.5\n")
    rows = ReadCSV(path) >> MapCol(0, int) >> Collect()
    assert rows == [(1, "2.5")]


def test_missing_file(tmp_path):
    with pytest.raises(FlowError, match="nope.csv"):
        ReadCSV(tmp_path / "nope.csv") >> Collect()


def test_malformed_quoting_names_line(tmp_path):
    path = write(tmp_path / "bad.csv", 'ok,1\n"x"y,2\n')
    with pytest.raises(FlowError, match="line 2"):
        ReadCSV(path) >> Collect()


def test_config_rejects_quote_as_delimiter():
    with pytest.raises(ValueError):
        CsvConfig(delimiter='"')


class TestWrite:
    def test_simple(self, tmp_path):
        path = tmp_path / "o.csv"
        assert [("a", 1)] >> WriteCSV(path) == 1
        assert path.read_bytes() == b"a,1\n"

    def test_empty(self, tmp_path):
        path = tmp_path / "o.csv"
        assert [] >> WriteCSV(path) == 0
        assert path.read_bytes() == b""

    def test_empty_with_header(self, tmp_path):
        path = tmp_path / "o.csv"
        [] >> WriteCSV(path, CsvConfig(has_header=True), header=("file", "label"))
        assert path.read_bytes() == b"file,label\n"

    def test_quotes_only_when_needed(self, tmp_path):
        path = tmp_path / "o.csv"
        [("a,b", 'say "hi"', "plain", 0.1)] >> WriteCSV(path)
        assert path.read_bytes() == b'"a,b","say ""hi""",plain,0.1\n'

    def test_unwritable(self, tmp_path):
        with pytest.raises(FlowError, match="cannot write"):
            [("a",)] >> WriteCSV(tmp_path / "no" / "dir.csv")

    def test_round_trip_fixed(self, tmp_path):
        rows = [("x", "1"), ("with,comma", "q\"uote"), ("", "multi\nline")]
        rows >> WriteCSV(tmp_path / "r.csv")
        assert ReadCSV(tmp_path / "r.csv") >> Collect() == rows


text = st.text(st.characters(blacklist_categories=("Cs",), blacklist_characters="\r\x00"), max_size=12)


@given(st.lists(st.tuples(text, text), max_size=10))
def test_round_trip_property(tmp_path_factory, rows):
    path = tmp_path_factory.mktemp("csv") / "r.csv"
    rows >> WriteCSV(path)
    assert ReadCSV(path) >> Collect() == rows
