"""Bidirectional codec between career histories and their resume-like text.

Rendering is byte-exact and locale-independent: the layout is a fixed
six-part template (source tag, demographic sentence, optional birth-year
sentence, a constant header, one ``YEAR (education): Title`` line per record,
and a closing ``<END OF DATA>`` marker). Prompts for predicting record ``t``
render everything before ``t`` and conclude with a partial ``YEAR
(education):`` line that ends at the colon.

``parse`` inverts ``render_full`` exactly, so the codec round-trips; parse
failures carry the offending line number.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .corpus import (
    CareerHistory,
    CareerRecord,
    Education,
    Ethnicity,
    Gender,
    Region,
    StaticCovariates,
)
from .taxonomy import OccupationTaxonomy


class TemplateError(ValueError):
    pass


class TemplateParseError(TemplateError):
    def __init__(self, lineno: int, message: str):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


GENDER_TEXT = {Gender.MALE: "male", Gender.FEMALE: "female"}
ETHNICITY_TEXT = {
    Ethnicity.WHITE: "white",
    Ethnicity.BLACK: "black or african american",
    Ethnicity.HISPANIC: "hispanic or latino",
    Ethnicity.OTHER: "other or unknown",
}
REGION_TEXT = {
    Region.NORTHEAST: "northeast",
    Region.NORTHCENTRAL: "northcentral",
    Region.SOUTH: "south",
    Region.WEST: "west",
}
EDUCATION_TEXT = {
    Education.LESS_THAN_HS: "less than high school",
    Education.HIGH_SCHOOL: "high school",
    Education.SOME_COLLEGE: "some college",
    Education.COLLEGE: "college",
    Education.GRADUATE: "any graduate",
}

_GENDER_FROM_TEXT = {v: k for k, v in GENDER_TEXT.items()}
_ETHNICITY_FROM_TEXT = {v: k for k, v in ETHNICITY_TEXT.items()}
_REGION_FROM_TEXT = {v: k for k, v in REGION_TEXT.items()}
_EDUCATION_FROM_TEXT = {v: k for k, v in EDUCATION_TEXT.items()}

HEADER_LINE = (
    "The worker has the following records of work experience, one entry per line, "
    "including year, education level, and the job title:"
)
END_MARKER = "<END OF DATA>"

_SOURCE_RE = re.compile(r"^<A worker from the (.+) dataset>$")
_DEMOG_RE = re.compile(
    r"^The following information is available about the work history of a "
    r"(male|female) (.+) US worker residing in the "
    r"(northeast|northcentral|south|west) region\.$"
)
_BIRTH_RE = re.compile(r"^The worker was born in (\d{4})\.$")
_RECORD_RE = re.compile(r"^(\d{4}) \(([a-z ]+)\): (.+)$")
_NUMERIC_TITLE_RE = re.compile(r"^job_(\d{3})$")


@dataclass(frozen=True)
class TemplateConfig:
    dataset_tag: str = "SYNTH"
    include_birth_year: bool = True
    numeric_titles: bool = False
    trailing_space: bool = False  # sensitivity flag for the partial prompt line

    def __post_init__(self):
        if not self.dataset_tag:
            raise TemplateError("dataset_tag must be non-empty")


class NumericTitleMap:
    """Seeded bijection from taxonomy codes to opaque ``job_NNN`` strings.

    Numbers are a random permutation of 1..size, always rendered with exactly
    three digits, so a taxonomy may hold at most 999 entries in numeric mode.
    """

    def __init__(self, mapping: dict[int, str], seed: int):
        values = list(mapping.values())
        if len(set(values)) != len(values):
            raise TemplateError("numeric title map is not a bijection")
        for v in values:
            if not _NUMERIC_TITLE_RE.match(v):
                raise TemplateError(f"bad numeric title {v!r}")
        self.mapping = dict(mapping)
        self.seed = seed
        self._inverse = {v: k for k, v in mapping.items()}

    @classmethod
    def build(cls, taxonomy: OccupationTaxonomy, seed: int) -> "NumericTitleMap":
        if taxonomy.size > 999:
            raise TemplateError("numeric titles support at most 999 occupations")
        rng = np.random.default_rng(seed)
        numbers = rng.permutation(taxonomy.size) + 1
        mapping = {code: f"job_{n:03d}" for code, n in zip(taxonomy.codes(), numbers)}
        return cls(mapping, seed)

    def numeric_title(self, code: int) -> str:
        return self.mapping[code]

    def code_of(self, numeric_title: str) -> int:
        try:
            return self._inverse[numeric_title]
        except KeyError:
            raise TemplateError(f"unknown numeric title {numeric_title!r}") from None

    def dump_json(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump({"seed": self.seed, "mapping": {str(k): v for k, v in self.mapping.items()}}, fh, indent=0)

    @classmethod
    def load_json(cls, path) -> "NumericTitleMap":
        with open(path, "r", encoding="utf-8") as fh:
            obj = json.load(fh)
        return cls({int(k): v for k, v in obj["mapping"].items()}, int(obj["seed"]))


class TemplateCodec:
    """Renders histories to text and parses that text back."""

    def __init__(
        self,
        taxonomy: OccupationTaxonomy,
        config: TemplateConfig = TemplateConfig(),
        numeric_map: Optional[NumericTitleMap] = None,
    ):
        if config.numeric_titles and numeric_map is None:
            raise TemplateError("numeric_titles requires a NumericTitleMap")
        self.taxonomy = taxonomy
        self.config = config
        self.numeric_map = numeric_map

    # ----------------------------------------------------------- rendering

    def title_of(self, code: int) -> str:
        if self.config.numeric_titles:
            return self.numeric_map.numeric_title(code)
        return self.taxonomy.title(code)

    def record_line(self, record: CareerRecord) -> str:
        return f"{record.year} ({EDUCATION_TEXT[record.education]}): {self.title_of(record.occupation)}"

    def _preamble(self, history: CareerHistory) -> list[str]:
        s = history.static
        lines = [
            f"<A worker from the {self.config.dataset_tag} dataset>",
            "The following information is available about the work history of a "
            f"{GENDER_TEXT[s.gender]} {ETHNICITY_TEXT[s.ethnicity]} US worker residing in the "
            f"{REGION_TEXT[s.region]} region.",
        ]
        if self.config.include_birth_year:
            if s.birth_year is None:
                raise TemplateError("include_birth_year is set but birth year is missing")
            lines.append(f"The worker was born in {s.birth_year}.")
        lines.append(HEADER_LINE)
        return lines

    def render_full(self, history: CareerHistory) -> str:
        """Complete career text, one record line per observation, each line
        newline-terminated, closed by the end marker."""
        lines = self._preamble(history)
        for record in history.records:
            lines.append(self.record_line(record))
        lines.append(END_MARKER)
        return "\n".join(lines) + "\n"

    def render_prompt(self, history: CareerHistory, t: int) -> str:
        """Prompt for predicting record ``t`` (1-based): all records before
        ``t`` followed by a partial line that ends at the colon."""
        if not (1 <= t <= len(history)):
            raise TemplateError(f"transition index {t} out of range 1..{len(history)}")
        lines = self._preamble(history)
        for record in history.records[: t - 1]:
            lines.append(self.record_line(record))
        target = history.records[t - 1]
        partial = f"{target.year} ({EDUCATION_TEXT[target.education]}):"
        if self.config.trailing_space:
            partial += " "
        lines.append(partial)
        return "\n".join(lines)

    def title_continuation(self, code: int) -> str:
        """Text that completes a partial prompt line for ``code``: the record
        line puts one space between the colon and the title, so the
        continuation carries a leading space unless the prompt already ends
        with one."""
        title = self.title_of(code)
        return title if self.config.trailing_space else " " + title

    def enrich_prompt(
        self,
        base: str,
        include_titles: bool = False,
        resumes: Sequence[str] = (),
    ) -> str:
        """Prepend the full title list and/or example resumes to ``base``,
        blocks separated by exactly one blank line."""
        blocks: list[str] = []
        if include_titles:
            blocks.append("\n".join(self.title_of(c) for c in self.taxonomy.codes()) + "\n")
        blocks.extend(resumes)
        if not blocks:
            return base
        return "".join(block + "\n" for block in blocks) + base

    # ------------------------------------------------------------- parsing

    def _code_of_title(self, title: str, lineno: int) -> int:
        if self.taxonomy.has_title(title):
            return self.taxonomy.code_of_title(title)
        if self.numeric_map is not None and _NUMERIC_TITLE_RE.match(title):
            try:
                return self.numeric_map.code_of(title)
            except TemplateError:
                raise TemplateParseError(lineno, f"unknown numeric title {title!r}") from None
        raise TemplateParseError(lineno, f"unknown job title {title!r}")

    def parse(self, text: str, individual_id: str = "parsed") -> CareerHistory:
        """Invert :meth:`render_full`. The template carries no individual id,
        so the caller supplies one (defaults to ``"parsed"``)."""
        lines = text.split("\n")
        if lines and lines[-1] == "":
            lines.pop()
        if len(lines) < 4:
            raise TemplateParseError(len(lines), "template too short")
        m = _SOURCE_RE.match(lines[0])
        if not m:
            raise TemplateParseError(1, f"bad source line {lines[0]!r}")
        source_tag = m.group(1)
        m = _DEMOG_RE.match(lines[1])
        if not m:
            raise TemplateParseError(2, f"bad demographic line {lines[1]!r}")
        gender = _GENDER_FROM_TEXT[m.group(1)]
        region = _REGION_FROM_TEXT[m.group(3)]
        try:
            ethnicity = _ETHNICITY_FROM_TEXT[m.group(2)]
        except KeyError:
            raise TemplateParseError(2, f"unknown ethnicity text {m.group(2)!r}") from None
        idx = 2
        birth_year = None
        m = _BIRTH_RE.match(lines[idx])
        if m:
            birth_year = int(m.group(1))
            idx += 1
        if idx >= len(lines) or lines[idx] != HEADER_LINE:
            raise TemplateParseError(idx + 1, "missing record header line")
        idx += 1
        records: list[CareerRecord] = []
        prev_year = None
        prev_edu = None
        for lineno0 in range(idx, len(lines)):
            line = lines[lineno0]
            lineno = lineno0 + 1
            if line == END_MARKER:
                if lineno0 != len(lines) - 1:
                    raise TemplateParseError(lineno, "content after end marker")
                if not records:
                    raise TemplateParseError(lineno, "template has no records")
                static = StaticCovariates(gender=gender, ethnicity=ethnicity, region=region, birth_year=birth_year)
                return CareerHistory(
                    individual_id=individual_id,
                    source_tag=source_tag,
                    static=static,
                    records=tuple(records),
                )
            m = _RECORD_RE.match(line)
            if not m:
                raise TemplateParseError(lineno, f"malformed record line {line!r}")
            year = int(m.group(1))
            edu_text = m.group(2)
            if edu_text not in _EDUCATION_FROM_TEXT:
                raise TemplateParseError(lineno, f"unknown education level {edu_text!r}")
            education = _EDUCATION_FROM_TEXT[edu_text]
            code = self._code_of_title(m.group(3), lineno)
            if prev_year is not None and year <= prev_year:
                raise TemplateParseError(lineno, f"year {year} not increasing")
            if prev_edu is not None and list(Education).index(education) < list(Education).index(prev_edu):
                raise TemplateParseError(lineno, "education level decreases")
            prev_year, prev_edu = year, education
            records.append(CareerRecord(year=year, education=education, occupation=code))
        raise TemplateParseError(len(lines), "missing end marker")
