import pytest

from citematch.model import Author, BibRecord, Pages
from citematch.synth import generate_corpus


def make_record(rec_id, title, surnames=("Müller",), source="Zeitschrift für Soziologie", **kw):
    return BibRecord(id=rec_id, title=title, source=source,
                     authors=tuple(Author(s) for s in surnames), **kw)


@pytest.fixture(scope="session")
def small_corpus():
    return generate_corpus(n_references=120, n_records=600, seed=7)


@pytest.fixture(scope="session")
def tiny_records():
    return [
        make_record("r1", "Data Mining: Concepts and Techniques", ("Han", "Kamber"), "Morgan Kaufmann",
                    year="2001", volume="1", pages=Pages("1", "550")),
        make_record("r2", "Mining of Massive Datasets", ("Leskovec", "Rajaraman", "Ullman"), "Cambridge",
                    year="2014", volume="2", issue="1", pages=Pages("10", "20")),
        make_record("r3", "Record Linkage and Data Mining", ("Christen",), "Springer", year="2012",
                    source_abbrev="Spr."),
        make_record("r4", "Soziale Ungleichheit in Deutschland", ("Müller", "Meyer"), "KZfSS",
                    year="2001", volume="34", issue="2", pages=Pages("1123", "1144")),
        make_record("r5", "data data mining mining", ("Maier",), "Data Journal", year="1999"),
    ]


# criterion number -> (passed, detail lines); filled by test_acceptance.py
ACCEPTANCE_RESULTS: dict[int, tuple[bool, list[str]]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE_RESULTS):
        passed, details = ACCEPTANCE_RESULTS[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if passed else 'FAIL'}")
        for line in details:
            terminalreporter.write_line(f"    {line}")
