"""Synthetic citation-matching corpora.

Generates a bibliographic database (with duplicate records), reference
strings rendered in several citation styles with typing noise, a simulated
token-level segmentation whose errors carry lower probabilities, and the
gold mapping.  Everything is driven by one seed.

The corpora exercise the full pipeline at realistic scale; they are not a
substitute for a curated gold standard.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field, replace

from .model import Author, BibRecord, GoldStandard, Pages, SegmentedReference, SegmentToken

SURNAMES = """
Müller Schmidt Schneider Fischer Weber Meyer Meier Maier Wagner Becker Schulz Hoffmann Schäfer Koch
Bauer Richter Klein Wolf Schröder Neumann Schwarz Zimmermann Braun Krüger Hofmann Hartmann Lange
Schmitt Werner Schmitz Krause Lehmann Schmid Schulze Maurer Köhler Herrmann König Walter Mayer Huber
Kaiser Fuchs Peters Lang Scholz Möller Weiß Jung Hahn Schubert Vogel Friedrich Keller Günther Frank
Berger Winkler Roth Beck Lorenz Baumann Franke Albrecht Schuster Simon Ludwig Böhm Winter Kraus Martin
Schumacher Krämer Vogt Stein Jäger Otto Sommer Groß Seidel Heinrich Brandt Haas Schreiber Graf
Schulte Dietrich Ziegler Kuhn Kühn Pohl Engel Horn Busch Bergmann Thomas Voigt Sauer Arnold Wolff
Pfeiffer Smith Johnson Williams Brown Jones Miller Davis Wilson Anderson Taylor Moore Jackson White
Harris Clark Lewis Robinson Walker Young Allen Wright Scott Green Baker Adams Nelson Hill Campbell
Mitchell Roberts Carter Phillips Evans Turner Parker Collins Edwards Stewart Morris Murphy Cook Rogers
Mayr Otte Diekmann Esser Luhmann Habermas Beck Bourdieu Giddens Putnam Coleman Boudon Lepsius Zapf
Glatzer Noll Kaase Klingemann Pappi Schnell Kreuter Bachteler Rässler Lüdenscheidt Breschnew
""".split()

GIVEN = """
Jürgen Klaus Peter Michael Thomas Andreas Stefan Wolfgang Hans Uwe Karl Dieter Rainer Heinz Ulrich
Monika Sabine Petra Andrea Claudia Susanne Birgit Gabriele Ursula Renate Heike Martina Christine Anna
John Mary Robert Patricia James Linda David Barbara Richard Susan Joseph Karen Charles Nancy Daniel
Behnam Philipp Wolf Ingrid Hartmut Gerhard Rolf Bernd Helmut Werner Ernst Walter Rudolf Friedrich
""".split()

GERMAN_WORDS = """
arbeit arbeitsmarkt bildung familie gesellschaft sozialstruktur ungleichheit migration integration
jugend alter generation einkommen armut reichtum wohlfahrtsstaat politik demokratie wahlen partei
partizipation vertrauen werte wandel modernisierung individualisierung lebenslauf erwerbstätigkeit
beruf karriere geschlecht frauen männer kinder eltern schule hochschule studium ausbildung mobilität
region stadt land ostdeutschland westdeutschland europa vereinigung transformation umfrage methode
befragung stichprobe messung validität reliabilität analyse panel daten längsschnitt querschnitt
theorie empirie kritik perspektive ansatz konzept entwicklung ergebnisse befunde vergleich
internationale deutschland bundesrepublik zufriedenheit gesundheit krankheit pflege rente
sozialpolitik arbeitslosigkeit beschäftigung lohn netzwerke kapital kultur religion kirche
medien öffentlichkeit kommunikation wissenschaft forschung soziologie ökonomie institutionen
organisation betrieb unternehmen gewerkschaften konflikt gewalt kriminalität recht staat verwaltung
reform krise zukunft geschichte erinnerung identität milieu lebensstil konsum freizeit sport
""".split()

ENGLISH_WORDS = """
labor market education family society social structure inequality migration integration youth aging
generation income poverty wealth welfare state politics democracy elections party participation trust
values change modernization individualization life course employment occupation career gender women
men children parents school university mobility region city rural europe unification transformation
survey method interview sample measurement validity reliability analysis panel data longitudinal
theory evidence critique perspective approach concept development results findings comparison
international germany satisfaction health illness care pension policy unemployment wages networks
capital culture religion church media public communication science research sociology economics
institutions organization firms unions conflict violence crime law government administration reform
crisis future history memory identity lifestyle consumption leisure attitudes behavior networks
citation matching record linkage quality estimation bias nonresponse mode effects weighting
""".split()

GERMAN_STOP = ["der", "die", "das", "und", "in", "von", "zur", "zum", "für", "im", "mit", "über"]
ENGLISH_STOP = ["the", "of", "and", "in", "a", "for", "on", "to", "with", "from"]

JOURNALS = [
    ("Kölner Zeitschrift für Soziologie und Sozialpsychologie", "KZfSS"),
    ("Zeitschrift für Soziologie", "Z. Soziol."),
    ("Soziale Welt", "Soz. Welt"),
    ("Berliner Journal für Soziologie", "Berl. J. Soziol."),
    ("Politische Vierteljahresschrift", "PVS"),
    ("Zeitschrift für Politikwissenschaft", "Z. Polit.wiss."),
    ("Leviathan", None),
    ("Soziologische Revue", "Soziol. Rev."),
    ("Mitteilungen aus der Arbeitsmarkt- und Berufsforschung", "MittAB"),
    ("Zeitschrift für Erziehungswissenschaft", "Z. Erzieh.wiss."),
    ("Zeitschrift für Pädagogik", "Z. Päd."),
    ("Sozialer Fortschritt", "Soz. Fortschr."),
    ("Historical Social Research", "HSR"),
    ("ZUMA-Nachrichten", "ZUMA-Nachr."),
    ("Methoden, Daten, Analysen", "mda"),
    ("Zeitschrift für Familienforschung", "Z. Fam.forsch."),
    ("Journal of Family Research", "JFR"),
    ("European Sociological Review", "Eur. Sociol. Rev."),
    ("American Sociological Review", "Am. Sociol. Rev."),
    ("American Journal of Sociology", "Am. J. Sociol."),
    ("Social Forces", "Soc. Forces"),
    ("Journal of Marriage and the Family", "J. Marriage Fam."),
    ("Public Opinion Quarterly", "Public Opin. Q."),
    ("Sociological Methods and Research", "Sociol. Methods Res."),
    ("Social Science Research", "Soc. Sci. Res."),
    ("Journal of European Social Policy", "J. Eur. Soc. Policy"),
    ("West European Politics", "West Eur. Polit."),
    ("Electoral Studies", "Elect. Stud."),
    ("Social Indicators Research", "Soc. Indic. Res."),
    ("Work, Employment and Society", "Work Employ. Soc."),
    ("International Migration Review", "Int. Migr. Rev."),
    ("Scientometrics", None),
    ("Journal of Documentation", "J. Doc."),
    ("Information Processing and Management", "Inf. Process. Manag."),
    ("International Journal on Digital Libraries", "Int. J. Digit. Libr."),
]

BOOKS = [
    "Handbuch Sozialstrukturanalyse", "Lehrbuch der Soziologie", "Sozialberichterstattung in Deutschland",
    "Datenreport", "Die Sozialstruktur Deutschlands", "Handbook of Survey Research",
    "Soziale Ungleichheiten", "Lebensverläufe und sozialer Wandel", "Wahlen und Wähler",
    "Handbuch der empirischen Sozialforschung", "The Welfare State Reader", "Blickpunkt Gesellschaft",
]

PUBLISHERS = ["Opladen: Leske + Budrich", "Wiesbaden: VS Verlag", "Frankfurt/M.: Campus",
              "München: Oldenbourg", "Stuttgart: Enke", "London: Sage", "Oxford: Oxford University Press"]


@dataclass
class SyntheticCorpus:
    references: list[SegmentedReference]
    records: list[BibRecord]
    gold: GoldStandard
    # reference id -> rendering style, for diagnostics
    styles: dict[str, str] = field(default_factory=dict)


_CUM_WEIGHTS: dict[tuple[int, float], list[float]] = {}


def _zipf_choice(rng: random.Random, items: list, s: float = 1.0):
    key = (len(items), s)
    cum = _CUM_WEIGHTS.get(key)
    if cum is None:
        total, cum = 0.0, []
        for i in range(len(items)):
            total += 1.0 / (i + 1) ** s
            cum.append(total)
        _CUM_WEIGHTS[key] = cum
    return rng.choices(items, cum_weights=cum, k=1)[0]


@dataclass
class _Work:
    authors: list[tuple[str, str]]
    title: str
    source: str
    abbrev: str | None
    is_journal: bool
    year: int
    volume: str | None
    issue: str | None
    pages: tuple[int, int] | None
    editors: list[tuple[str, str]] = field(default_factory=list)
    publisher: str | None = None


class _Generator:
    def __init__(self, rng: random.Random):
        self.rng = rng
        # shuffled once so Zipf popularity differs between seeds
        self.surnames = list(dict.fromkeys(SURNAMES))
        rng.shuffle(self.surnames)
        self.de_words = GERMAN_WORDS[:]
        self.en_words = ENGLISH_WORDS[:]
        rng.shuffle(self.de_words)
        rng.shuffle(self.en_words)

    def person(self) -> tuple[str, str]:
        return _zipf_choice(self.rng, self.surnames, 0.8), self.rng.choice(GIVEN)

    def title(self) -> str:
        rng = self.rng
        german = rng.random() < 0.6
        words, stops = (self.de_words, GERMAN_STOP) if german else (self.en_words, ENGLISH_STOP)
        n = rng.choice([2, 3, 3, 4, 4, 5, 5, 6, 7])
        out = []
        for i in range(n):
            out.append(_zipf_choice(rng, words, 0.7))
            if i < n - 1 and rng.random() < 0.45:
                out.append(rng.choice(stops))
        text = " ".join(out)
        if rng.random() < 0.3:
            m = rng.choice([2, 3, 4])
            text += ": " + " ".join(_zipf_choice(rng, words, 0.7) for _ in range(m))
        return text[0].upper() + text[1:]

    def work(self) -> _Work:
        rng = self.rng
        n_auth = rng.choices([1, 2, 3, 4, 5], weights=[45, 30, 14, 7, 4])[0]
        authors = []
        while len(authors) < n_auth:
            p = self.person()
            if p[0] not in [a[0] for a in authors]:
                authors.append(p)
        year = rng.randint(1960, 2017)
        if rng.random() < 0.75:
            source, abbrev = rng.choice(JOURNALS)
            volume = str(max(1, year - 1950 + rng.randint(-5, 5)))
            issue = str(rng.randint(1, 6)) if rng.random() < 0.7 else None
            start = rng.randint(1, 800)
            return _Work(authors, self.title(), source, abbrev, True, year, volume, issue,
                         (start, start + rng.randint(4, 35)))
        source = rng.choice(BOOKS)
        start = rng.randint(5, 400)
        editors = [self.person() for _ in range(rng.choice([1, 1, 2]))]
        return _Work(authors, self.title(), source, None, False, year, None, None,
                     (start, start + rng.randint(8, 30)), editors, rng.choice(PUBLISHERS))


def _typo(rng: random.Random, word: str) -> str:
    if len(word) < 4:
        return word
    i = rng.randrange(1, len(word) - 1)
    op = rng.random()
    if op < 0.4:
        return word[:i] + word[i + 1:]
    if op < 0.7:
        return word[:i] + word[i + 1] + word[i] + word[i + 2:]
    return word[:i] + rng.choice("aeinrst") + word[i + 1:]


def _record_from_work(rec_id: str, w: _Work, rng: random.Random, variant: bool) -> BibRecord:
    title, issue, pages, abbrev, authors = w.title, w.issue, w.pages, w.abbrev, w.authors
    if variant:
        r = rng.random()
        if r < 0.3 and ":" in title:
            title = title.split(":")[0]
        elif r < 0.5:
            words = title.split()
            j = rng.randrange(len(words))
            words[j] = _typo(rng, words[j])
            title = " ".join(words)
        elif r < 0.65:
            title = title.lower()
        if rng.random() < 0.4:
            issue = None
        if rng.random() < 0.3:
            pages = None
        if rng.random() < 0.3:
            abbrev = None
        if len(authors) > 3 and rng.random() < 0.5:
            authors = authors[:3]
    return BibRecord(
        id=rec_id,
        authors=tuple(Author(s, g) for s, g in authors),
        title=title,
        source=w.source,
        source_abbrev=abbrev,
        year=str(w.year),
        volume=w.volume,
        issue=issue,
        pages=Pages(str(pages[0]), str(pages[1])) if pages else None,
    )


class _Builder:
    """Accumulates labeled pieces of a reference string."""

    def __init__(self):
        self.pieces: list[tuple[str, str | None]] = []

    def add(self, text: str, label: str | None = None, sep: str = " "):
        if not text:
            return
        if self.pieces and sep:
            self.pieces.append((sep, None))
        self.pieces.append((text, label))

    def glue(self, text: str):
        self.pieces.append((text, None))

    def tokens(self) -> tuple[str, list[tuple[str, str | None]]]:
        raw = "".join(t for t, _ in self.pieces).strip()
        # re-tokenize on whitespace keeping the label of the first labeled char
        toks: list[tuple[str, str | None]] = []
        cur, cur_label = "", None
        for text, label in self.pieces:
            for ch in text:
                if ch.isspace():
                    if cur:
                        toks.append((cur, cur_label))
                    cur, cur_label = "", None
                else:
                    if not cur:
                        cur_label = label
                    elif cur_label is None and label is not None:
                        cur_label = label
                    cur += ch
        if cur:
            toks.append((cur, cur_label))
        return raw, toks


def _render(w: _Work, rng: random.Random) -> tuple[str, list[tuple[str, str | None]], str]:
    """Raw string and labeled tokens for one citation of ``w``."""
    style = rng.choices(["apa", "german", "short", "numeric"], weights=[30, 40, 15, 15])[0]
    title = w.title
    words = title.split()
    if rng.random() < 0.25:
        j = rng.randrange(len(words))
        words[j] = _typo(rng, words[j])
    if rng.random() < 0.1 and len(words) > 3:
        del words[rng.randrange(len(words))]
    title = " ".join(words)
    year = str(w.year)
    if rng.random() < 0.04:
        year = str(w.year + rng.choice([-1, 1]))
    if rng.random() < 0.08:
        year += rng.choice("ab")
    authors = w.authors
    et_al = False
    if len(authors) > 3 and rng.random() < 0.6:
        authors, et_al = authors[:1], True
    source = w.abbrev if (w.abbrev and w.is_journal and rng.random() < 0.35) else w.source
    b = _Builder()

    def name(s, g, inverted=True, initials=True):
        if rng.random() < 0.03:
            s = _typo(rng, s)
        gg = g[0] + "." if initials else g
        return (s, gg) if inverted else (gg, s)

    initials = style in ("apa", "short", "numeric") or rng.random() < 0.4
    if style == "numeric":
        b.add(f"[{rng.randint(1, 60)}]")
    for i, (s, g) in enumerate(authors):
        inverted = style in ("apa", "german") or i == 0 and style != "short"
        first, second = name(s, g, inverted, initials)
        if i:
            b.glue("/" if style == "german" else ",")
            if style == "apa" and i == len(authors) - 1:
                b.add("&")
        b.add(first + ("," if inverted else ""), "author")
        b.add(second, "author")
    if et_al:
        b.add("et al.")
    if style in ("apa", "german"):
        b.add(f"({year})", "year")
        b.glue(":" if style == "german" else ".")
        b.add(title, "title")
        b.glue(".")
    else:
        b.glue(":")
        b.add(title, "title")
        b.glue(".")
    if w.is_journal:
        if style == "german":
            b.add("In:")
        b.add(source, "source")
        if w.volume:
            if style == "apa":
                b.glue(",")
            b.add(w.volume, "volume")
            if w.issue and rng.random() < 0.85:
                b.add(f"({w.issue})", "issue", sep="" if style == "apa" else " ")
        if style in ("short", "numeric"):
            b.add(f"({year})", "year")
        if w.pages and rng.random() < 0.85:
            b.glue(",")
            b.add("S." if style == "german" else ("pp." if style == "numeric" else ""))
            b.add(f"{w.pages[0]}-{w.pages[1]}", "page")
        b.glue(".")
    else:
        b.add("In:")
        for s, g in w.editors:
            b.add(f"{s},", None)
            b.add(f"{g[0]}.")
        b.add("(Hrsg.):" if style == "german" else "(Eds.),")
        b.add(source, "source")
        b.glue(".")
        if w.publisher:
            b.add(w.publisher)
        if style in ("short", "numeric"):
            b.glue(",")
            b.add(year, "year")
        if w.pages and rng.random() < 0.7:
            b.glue(",")
            b.add("S." if style == "german" else "pp.")
            b.add(f"{w.pages[0]}-{w.pages[1]}", "page")
        b.glue(".")
    raw, toks = b.tokens()
    return raw, toks, style


def _segment(toks: list[tuple[str, str | None]], rng: random.Random,
             quality: float) -> dict[str, list[SegmentToken]]:
    """Simulated CRF output: label noise concentrated on low-confidence tokens."""
    labels = [lab for _, lab in toks]
    wrong = [False] * len(toks)
    n = len(toks)

    def relabel(i, new):
        if labels[i] != new:
            labels[i] = new
            wrong[i] = True

    err = 1.0 - quality
    # title/source boundary drift
    title_idx = [i for i, (_, lab) in enumerate(toks) if lab == "title"]
    if title_idx and rng.random() < 0.9 * err + 0.05:
        k = rng.randint(1, min(3, len(title_idx)))
        end = title_idx[-1]
        for i in range(end - k + 1, end + 1):
            relabel(i, "source")
    if title_idx and rng.random() < 0.5 * err:
        # author/title boundary
        relabel(title_idx[0], "author")
    if rng.random() < 0.6 * err:
        vol = [i for i in range(n) if labels[i] == "volume"]
        iss = [i for i in range(n) if labels[i] == "issue"]
        for i in vol:
            relabel(i, "issue")
        for i in iss:
            relabel(i, "volume")
    for i in range(n):
        if toks[i][1] is not None and rng.random() < 0.35 * err:
            relabel(i, rng.choice(["author", "title", "source", None, "year", "page"]))
        elif toks[i][1] is None and rng.random() < 0.3 * err:
            relabel(i, rng.choice(["title", "source", "author"]))
    if title_idx and rng.random() < 0.25 * err:
        # whole title swallowed into the source segment
        for i in title_idx:
            relabel(i, "source")

    out: dict[str, list[SegmentToken]] = {}
    for i, (text, _) in enumerate(toks):
        lab = labels[i]
        if lab is None:
            continue
        if wrong[i]:
            p = rng.uniform(0.3, 0.8)
        else:
            p = min(1.0, max(0.0, rng.gauss(0.97 - 0.25 * err, 0.04)))
        out.setdefault(lab, []).append(SegmentToken(text, round(p, 4)))
    return out


def generate_corpus(n_references: int = 816, n_records: int = 18590, match_fraction: float = 517 / 816,
                    duplicate_fraction: float = 0.12, seed: int = 0) -> SyntheticCorpus:
    """Generate references, records and gold links.

    ``match_fraction`` of the references cite a work present in the
    database; the rest cite works drawn from the same distributions but
    absent from it.
    """
    rng = random.Random(seed)
    gen = _Generator(rng)
    records: list[BibRecord] = []
    work_records: list[list[str]] = []
    works: list[_Work] = []
    while len(records) < n_records:
        w = gen.work()
        ids = []
        n_copies = 1
        if rng.random() < duplicate_fraction:
            n_copies += rng.choice([1, 1, 1, 2, 3])
        for c in range(n_copies):
            if len(records) >= n_records:
                break
            rec_id = f"rec{len(records):06d}"
            records.append(_record_from_work(rec_id, w, rng, variant=c > 0))
            ids.append(rec_id)
        works.append(w)
        work_records.append(ids)
    # interleave duplicates so ids carry no structure
    order = list(range(len(records)))
    rng.shuffle(order)
    new_id = {records[o].id: f"s{i:06d}" for i, o in enumerate(order)}
    records = sorted((replace(r, id=new_id[r.id]) for r in records), key=lambda r: r.id)
    work_records = [[new_id[i] for i in ids] for ids in work_records]

    n_match = round(n_references * match_fraction)
    cited = rng.sample(range(len(works)), n_match)
    refs: list[SegmentedReference] = []
    gold: dict[str, frozenset[str]] = {}
    styles: dict[str, str] = {}
    plan = [("match", i) for i in cited] + [("nomatch", None)] * (n_references - n_match)
    rng.shuffle(plan)
    for r, (kind, wi) in enumerate(plan):
        ref_id = f"ref{r:04d}"
        if kind == "match":
            w = works[wi]
            gold[ref_id] = frozenset(work_records[wi])
        else:
            w = gen.work()
            gold[ref_id] = frozenset()
        raw, toks, style = _render(w, rng)
        quality = min(1.0, max(0.0, rng.betavariate(6, 1.5)))
        segments = _segment(toks, rng, quality)
        refs.append(SegmentedReference(ref_id, raw, {k: tuple(v) for k, v in segments.items()}))
        styles[ref_id] = style
    return SyntheticCorpus(refs, records, GoldStandard(gold), styles)
