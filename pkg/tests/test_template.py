import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from careerseq.corpus import (
    CareerHistory,
    CareerRecord,
    Education,
    Ethnicity,
    Gender,
    Region,
    StaticCovariates,
)
from careerseq.synthetic import SyntheticConfig, generate_synthetic
from careerseq.taxonomy import build_default_taxonomy
from careerseq.template import (
    NumericTitleMap,
    TemplateCodec,
    TemplateConfig,
    TemplateError,
    TemplateParseError,
)

TAX = build_default_taxonomy(334)


def code(title: str) -> int:
    return TAX.code_of_title(title)


def make_survey_worker() -> CareerHistory:
    static = StaticCovariates(Gender.FEMALE, Ethnicity.BLACK, Region.SOUTH, 1963)
    rows = [
        (1984, "Cooks"),
        (1985, "Food servers, nonrestaurant"),
        (1986, "Cleaners of vehicles and equipment"),
        (1988, "Food servers, nonrestaurant"),
        (1989, "Bus drivers"),
        (1990, "Food servers, nonrestaurant"),
        (1991, "Unemployed"),
        (1992, "Painting workers"),
        (1993, "Painting workers"),
        (1994, "Court, municipal, and license clerks"),
        (1996, "Septic tank servicers and sewer pipe cleaners"),
    ]
    records = tuple(CareerRecord(y, Education.SOME_COLLEGE, code(t)) for y, t in rows)
    return CareerHistory("w-app-c", "PSID", static, records)


def make_engineer_worker() -> CareerHistory:
    static = StaticCovariates(Gender.MALE, Ethnicity.WHITE, Region.WEST, 1984)
    rows = [
        (2009, "Industrial engineers, including health and safety"),
        (2011, "Mechanical engineers"),
        (2013, "Sales Representatives Services All Other"),
        (2015, "Unemployed"),
        (2017, "Mechanical engineers"),
        (2019, "Loan interviewers and clerks"),
        (2021, "Loan interviewers and clerks"),
    ]
    records = tuple(CareerRecord(y, Education.COLLEGE, code(t)) for y, t in rows)
    return CareerHistory("w-app-d", "PSID", static, records)


@pytest.fixture(scope="module")
def survey_worker():
    return make_survey_worker()


@pytest.fixture(scope="module")
def engineer_worker():
    return make_engineer_worker()


SURVEY_WORKER_TEXT = """<A worker from the PSID dataset>
The following information is available about the work history of a female black or african american US worker residing in the south region.
The worker was born in 1963.
The worker has the following records of work experience, one entry per line, including year, education level, and the job title:
1984 (some college): Cooks
1985 (some college): Food servers, nonrestaurant
1986 (some college): Cleaners of vehicles and equipment
1988 (some college): Food servers, nonrestaurant
1989 (some college): Bus drivers
1990 (some college): Food servers, nonrestaurant
1991 (some college): Unemployed
1992 (some college): Painting workers
1993 (some college): Painting workers
1994 (some college): Court, municipal, and license clerks
1996 (some college): Septic tank servicers and sewer pipe cleaners
<END OF DATA>
"""

TRANSITION_2_PROMPT = """<A worker from the PSID dataset>
The following information is available about the work history of a male white US worker residing in the west region.
The worker was born in 1984.
The worker has the following records of work experience, one entry per line, including year, education level, and the job title:
2009 (college): Industrial engineers, including health and safety
2011 (college):"""

TRANSITION_3_PROMPT = """<A worker from the PSID dataset>
The following information is available about the work history of a male white US worker residing in the west region.
The worker was born in 1984.
The worker has the following records of work experience, one entry per line, including year, education level, and the job title:
2009 (college): Industrial engineers, including health and safety
2011 (college): Mechanical engineers
2013 (college):"""


class TestRenderFull:
    def test_survey_worker_byte_identical(self, survey_worker):
        codec = TemplateCodec(TAX, TemplateConfig(dataset_tag="PSID"))
        assert codec.render_full(survey_worker) == SURVEY_WORKER_TEXT

    def test_single_record_six_lines(self):
        h = CareerHistory(
            "x",
            "PSID",
            StaticCovariates(Gender.MALE, Ethnicity.WHITE, Region.WEST, 1980),
            (CareerRecord(2000, Education.COLLEGE, code("Cooks")),),
        )
        codec = TemplateCodec(TAX, TemplateConfig(dataset_tag="PSID"))
        text = codec.render_full(h)
        assert text.endswith("\n")
        assert len(text.rstrip("\n").split("\n")) == 6

    def test_numeric_title_line_shape(self):
        nmap = NumericTitleMap.build(TAX, seed=5)
        codec = TemplateCodec(TAX, TemplateConfig(dataset_tag="PSID", numeric_titles=True), nmap)
        h = CareerHistory(
            "x",
            "PSID",
            StaticCovariates(Gender.FEMALE, Ethnicity.WHITE, Region.WEST, 1985),
            (CareerRecord(2013, Education.COLLEGE, code("Cooks")),),
        )
        lines = codec.render_full(h).split("\n")
        import re

        assert re.fullmatch(r"2013 \(college\): job_\d{3}", lines[4])

    def test_record_count_matches_history(self, survey_worker):
        codec = TemplateCodec(TAX, TemplateConfig(dataset_tag="PSID"))
        lines = codec.render_full(survey_worker).rstrip("\n").split("\n")
        assert len(lines) == 4 + len(survey_worker) + 1

    def test_birth_year_line_omitted(self, survey_worker):
        codec = TemplateCodec(TAX, TemplateConfig(dataset_tag="PSID", include_birth_year=False))
        text = codec.render_full(survey_worker)
        assert "born in" not in text

    def test_birth_year_required_when_flag_set(self):
        h = CareerHistory(
            "x",
            "PSID",
            StaticCovariates(Gender.MALE, Ethnicity.WHITE, Region.WEST, None),
            (CareerRecord(2000, Education.COLLEGE, code("Cooks")),),
        )
        codec = TemplateCodec(TAX, TemplateConfig(dataset_tag="PSID"))
        with pytest.raises(TemplateError, match="birth year"):
            codec.render_full(h)


class TestRenderPrompt:
    def test_transition_prompts_byte_identical(self, engineer_worker):
        codec = TemplateCodec(TAX, TemplateConfig(dataset_tag="PSID"))
        assert codec.render_prompt(engineer_worker, 2) == TRANSITION_2_PROMPT
        assert codec.render_prompt(engineer_worker, 3) == TRANSITION_3_PROMPT

    def test_t1_prompt_has_preamble_and_partial_line(self, engineer_worker):
        codec = TemplateCodec(TAX, TemplateConfig(dataset_tag="PSID"))
        lines = codec.render_prompt(engineer_worker, 1).split("\n")
        assert len(lines) == 5
        assert lines[-1] == "2009 (college):"

    def test_prompt_is_prefix_of_full_text(self, survey_worker):
        codec = TemplateCodec(TAX, TemplateConfig(dataset_tag="PSID"))
        full = codec.render_full(survey_worker)
        for t in range(1, len(survey_worker) + 1):
            prompt = codec.render_prompt(survey_worker, t)
            assert full.startswith(prompt)

    def test_trailing_space_flag(self, engineer_worker):
        codec = TemplateCodec(TAX, TemplateConfig(dataset_tag="PSID", trailing_space=True))
        assert codec.render_prompt(engineer_worker, 2).endswith("(college): ")

    def test_out_of_range(self, engineer_worker):
        codec = TemplateCodec(TAX, TemplateConfig(dataset_tag="PSID"))
        with pytest.raises(TemplateError):
            codec.render_prompt(engineer_worker, 99)


class TestParse:
    def test_fixture_recovers_covariates(self, survey_worker):
        codec = TemplateCodec(TAX, TemplateConfig(dataset_tag="PSID"))
        h = codec.parse(SURVEY_WORKER_TEXT, individual_id="w-app-c")
        assert h == survey_worker
        assert h.static.gender == Gender.FEMALE
        assert h.static.ethnicity == Ethnicity.BLACK
        assert h.static.region == Region.SOUTH
        assert h.static.birth_year == 1963

    def test_tampered_record_line_names_line_number(self):
        bad = SURVEY_WORKER_TEXT.replace("1989 (some college): Bus drivers", "1989 some college: Bus drivers")
        codec = TemplateCodec(TAX, TemplateConfig(dataset_tag="PSID"))
        with pytest.raises(TemplateParseError, match="line 9"):
            codec.parse(bad)

    def test_unknown_title(self):
        bad = SURVEY_WORKER_TEXT.replace("Bus drivers", "Chef de partie")
        codec = TemplateCodec(TAX, TemplateConfig(dataset_tag="PSID"))
        with pytest.raises(TemplateParseError, match="Chef de partie"):
            codec.parse(bad)

    def test_non_monotone_years(self):
        bad = SURVEY_WORKER_TEXT.replace("1989 (some college)", "1984 (some college)")
        codec = TemplateCodec(TAX, TemplateConfig(dataset_tag="PSID"))
        with pytest.raises(TemplateParseError, match="not increasing"):
            codec.parse(bad)

    def test_missing_end_marker(self):
        codec = TemplateCodec(TAX, TemplateConfig(dataset_tag="PSID"))
        with pytest.raises(TemplateParseError, match="end marker"):
            codec.parse(SURVEY_WORKER_TEXT.replace("<END OF DATA>\n", ""))

    def test_round_trip_on_synthetic_histories(self):
        ds, _ = generate_synthetic(SyntheticConfig(n_individuals=60, taxonomy_size=40, seed=12))
        codec = TemplateCodec(ds.taxonomy, TemplateConfig(dataset_tag="SYNTH"))
        for h in ds.individuals:
            assert codec.parse(codec.render_full(h), h.individual_id) == h

    def test_round_trip_numeric_mode(self):
        ds, _ = generate_synthetic(SyntheticConfig(n_individuals=30, taxonomy_size=25, seed=13))
        nmap = NumericTitleMap.build(ds.taxonomy, seed=3)
        codec = TemplateCodec(ds.taxonomy, TemplateConfig(dataset_tag="SYNTH", numeric_titles=True), nmap)
        for h in ds.individuals:
            assert codec.parse(codec.render_full(h), h.individual_id) == h


class TestNumericTitleMap:
    def test_three_digits_and_bijection(self):
        nmap = NumericTitleMap.build(TAX, seed=9)
        values = set(nmap.mapping.values())
        assert len(values) == TAX.size
        import re

        assert all(re.fullmatch(r"job_\d{3}", v) for v in values)

    def test_round_trip(self):
        nmap = NumericTitleMap.build(TAX, seed=9)
        for c in TAX.codes()[:50]:
            assert nmap.code_of(nmap.numeric_title(c)) == c

    def test_json_round_trip(self, tmp_path):
        nmap = NumericTitleMap.build(TAX, seed=4)
        path = tmp_path / "map.json"
        nmap.dump_json(path)
        again = NumericTitleMap.load_json(path)
        assert again.mapping == nmap.mapping

    def test_titles_must_have_exactly_three_digits(self):
        with pytest.raises(TemplateError, match="bad numeric title"):
            NumericTitleMap({1: "job_1000"}, seed=0)
        with pytest.raises(TemplateError, match="bad numeric title"):
            NumericTitleMap({1: "job_07"}, seed=0)


class TestEnrichPrompt:
    def test_identity_with_no_blocks(self, engineer_worker):
        codec = TemplateCodec(TAX, TemplateConfig(dataset_tag="PSID"))
        base = codec.render_prompt(engineer_worker, 2)
        assert codec.enrich_prompt(base) == base

    def test_titles_only_line_count(self, engineer_worker):
        codec = TemplateCodec(TAX, TemplateConfig(dataset_tag="PSID"))
        base = codec.render_prompt(engineer_worker, 2)
        enriched = codec.enrich_prompt(base, include_titles=True)
        assert len(enriched.split("\n")) == TAX.size + 1 + len(base.split("\n"))

    def test_blocks_separated_by_one_blank_line(self, engineer_worker, survey_worker):
        codec = TemplateCodec(TAX, TemplateConfig(dataset_tag="PSID"))
        base = codec.render_prompt(engineer_worker, 2)
        resume = codec.render_full(survey_worker)
        enriched = codec.enrich_prompt(base, include_titles=True, resumes=[resume])
        assert "\n\n\n" not in enriched
        assert enriched.count("\n\n") == 2
        assert enriched.endswith(base)

    def test_resume_order_preserved(self, engineer_worker, survey_worker):
        codec = TemplateCodec(TAX, TemplateConfig(dataset_tag="PSID"))
        base = codec.render_prompt(engineer_worker, 2)
        r1 = codec.render_full(survey_worker)
        r2 = codec.render_full(engineer_worker)
        enriched = codec.enrich_prompt(base, resumes=[r1, r2])
        assert enriched.index(r1.split("\n")[4]) < enriched.index(r2.split("\n")[4])


# randomized histories for the hypothesis round trip
_educations = list(Education)


@st.composite
def histories(draw):
    tax = build_default_taxonomy(30)
    n = draw(st.integers(1, 8))
    start = draw(st.integers(1950, 2000))
    years = sorted(draw(st.sets(st.integers(start, start + 40), min_size=n, max_size=n)))
    edu_start = draw(st.integers(0, 4))
    edu_steps = draw(st.lists(st.integers(0, 1), min_size=n, max_size=n))
    records = []
    level = edu_start
    for year, step in zip(years, edu_steps):
        level = min(4, level + step)
        records.append(CareerRecord(year, _educations[level], draw(st.sampled_from(tax.codes()))))
    static = StaticCovariates(
        draw(st.sampled_from(list(Gender))),
        draw(st.sampled_from(list(Ethnicity))),
        draw(st.sampled_from(list(Region))),
        draw(st.integers(1900, 2005)),
    )
    return CareerHistory("hyp", "FUZZ", static, tuple(records))


@settings(max_examples=60, deadline=None)
@given(histories())
def test_parse_render_identity_property(h):
    tax = build_default_taxonomy(30)
    codec = TemplateCodec(tax, TemplateConfig(dataset_tag="FUZZ"))
    assert codec.parse(codec.render_full(h), "hyp") == h
