import io
from collections import Counter

import pytest

from scriptviolence.errors import (
    DuplicateKeyError,
    EmptyScreenplayError,
    MalformedScriptError,
    ManifestError,
    ParseError,
    UnalignedSentenceError,
    UnknownLabelError,
)
from scriptviolence.ingest import (
    Gender,
    Race,
    Violence,
    demographics_index,
    is_cue,
    load_conllu,
    load_demographics,
    load_manifest,
    normalize_speaker,
    parse_screenplay,
    read_dataset,
    tokenize,
    write_dataset,
)


def pairs(sp):
    return [(u.speaker_id, u.text) for u in sp.utterances]


class TestParseScreenplay:
    def test_heading_cue_and_parenthetical(self):
        raw = "INT. HOUSE - NIGHT\nJOHN\nI will find you.\n\nMARY\n(whispering)\nStay away from me!\n"
        sp = parse_screenplay(raw, "m1")
        assert pairs(sp) == [("JOHN", "I will find you."), ("MARY", "Stay away from me!")]
        assert [u.index for u in sp.utterances] == [0, 1]
        assert all(u.movie_id == "m1" for u in sp.utterances)

    def test_dialogue_lines_joined(self):
        sp = parse_screenplay("JOHN\nRun.\nNow.\n", "m1")
        assert pairs(sp) == [("JOHN", "Run. Now.")]

    @pytest.mark.parametrize("raw", ["", "   \n\n\t\n"])
    def test_empty(self, raw):
        with pytest.raises(EmptyScreenplayError):
            parse_screenplay(raw, "m1")

    def test_only_action_lines(self):
        with pytest.raises(EmptyScreenplayError):
            parse_screenplay("EXT. FIELD - DAY\n\nWind moves the grass.\n", "m1")

    def test_dialogue_without_cue(self):
        raw = "JOHN\nHi.\n\n(shouting)\nGet out!\n"
        with pytest.raises(MalformedScriptError) as exc:
            parse_screenplay(raw, "m1")
        assert exc.value.line == 4

    def test_speaker_normalized(self):
        raw = "john  smith (V.O.)\nHello.\n\nJOHN SMITH\nAgain.\n"
        # lowercase cue is not a cue, so only the second block counts
        assert pairs(parse_screenplay(raw, "m")) == [("JOHN SMITH", "Again.")]
        raw = "JOHN   SMITH (V.O.)\nHello.\n"
        assert pairs(parse_screenplay(raw, "m")) == [("JOHN SMITH", "Hello.")]

    def test_action_and_transition_ignored(self):
        raw = ("FADE IN:\n\nEXT. DOCK - NIGHT\n\nWaves crash.\n\nREX\nWho's there?\n\n"
               "He turns.\n\nZOE\n(beat)\nMe.\n(smiles)\n\nCUT TO:\n")
        assert pairs(parse_screenplay(raw, "m")) == [("REX", "Who's there?"), ("ZOE", "Me.")]

    def test_deterministic(self):
        raw = "A\nx y\n\nB\nz\n"
        assert parse_screenplay(raw, "m") == parse_screenplay(raw, "m")


@pytest.mark.parametrize("line,expected", [
    ("JOHN", True), ("DR. NO", True), ("O'BRIEN", True), ("MARY-JANE", True), ("AGENT 47", True),
    ("JOHN (CONT'D)", True), ("INT. HOUSE", False), ("EXT. ROAD - DAY", False), ("John", False),
    ("X" * 41, False), ("123", False), ("WHAT?!", False),
])
def test_is_cue(line, expected):
    assert is_cue(line) is expected


def test_normalize_speaker():
    assert normalize_speaker("  dutch   schaefer (O.S.) ") == "DUTCH SCHAEFER"


def test_tokenize():
    assert tokenize('I can\'t — "stop", now!') == ["I", "can't", "stop", "now"]
    assert tokenize("'quoted' words.") == ["quoted", "words"]


class TestManifest:
    HEADER = "movie_id,title,genres,violence_label\n"

    def test_row(self):
        m = load_manifest(self.HEADER + "m1,Heat,Action|Crime,HIGH\n")
        assert m["m1"].title == "Heat"
        assert m["m1"].genres == {"Action", "Crime"}
        assert m["m1"].violence_label is Violence.HIGH

    def test_case_folding_and_missing_label(self):
        m = load_manifest(self.HEADER + "m1,A,Drama,high\nm2,B,Drama,\n")
        assert m["m1"].violence_label is Violence.HIGH
        assert m["m2"].violence_label is None

    def test_unknown_label(self):
        with pytest.raises(UnknownLabelError):
            load_manifest(self.HEADER + "m1,A,Drama,EXTREME\n")

    def test_duplicate(self):
        with pytest.raises(DuplicateKeyError):
            load_manifest(self.HEADER + "m1,A,Drama,LOW\nm1,B,Drama,LOW\n")

    def test_bad_header(self):
        with pytest.raises(ManifestError):
            load_manifest("id,title\nm1,A\n")


class TestDemographics:
    HEADER = "movie_id,character_id,gender,race\n"

    def test_known(self):
        (r,) = load_demographics(self.HEADER + "m1,JOHN,MALE,WHITE\n")
        assert (r.gender, r.race) == (Gender.MALE, Race.WHITE)

    def test_unknown_fallback_counted(self):
        warnings = Counter()
        (r,) = load_demographics(self.HEADER + "m1,ZOE,?,?\n", warnings)
        assert (r.gender, r.race) == (Gender.UNKNOWN, Race.UNKNOWN)
        assert warnings["demographics_unknown"] == 1

    def test_duplicate(self):
        with pytest.raises(DuplicateKeyError):
            load_demographics(self.HEADER + "m1,JOHN,MALE,WHITE\nm1,john,MALE,WHITE\n")

    def test_index(self):
        idx = demographics_index(load_demographics(self.HEADER + "m1,john (v.o.),female,black\n"))
        assert idx[("m1", "JOHN")].gender is Gender.FEMALE


THEY_ATTACKED_HER = """# movie_id = m1
# utt_index = 4
1\tThey\tthey\tPRON\t_\t_\t2\tnsubj\t_\t_
2\tattacked\tattack\tVERB\t_\t_\t0\troot\t_\t_
3\ther\tshe\tPRON\t_\t_\t2\tobj\t_\tCoref=MARY
"""


class TestConllu:
    def test_sentence(self):
        (s,) = load_conllu(THEY_ATTACKED_HER)
        assert (s.movie_id, s.utt_index) == ("m1", 4)
        assert [t.head for t in s.tokens] == [2, 0, 2]
        assert s.root.lemma == "attack"
        assert [t.surface for t in s.children(2)] == ["They", "her"]
        assert s.tokens[2].misc == {"Coref": "MARY"}

    def test_multiword_and_empty_nodes_skipped(self):
        text = THEY_ATTACKED_HER.replace("1\tThey", "1-2\tTheyattacked\t_\t_\t_\t_\t_\t_\t_\t_\n1\tThey")
        text += "3.1\tx\tx\tX\t_\t_\t_\t_\t_\t_\n"
        (s,) = load_conllu(text)
        assert len(s.tokens) == 3

    def test_several_sentences(self):
        text = THEY_ATTACKED_HER + "\n" + THEY_ATTACKED_HER.replace("utt_index = 4", "utt_index = 5")
        assert [s.utt_index for s in load_conllu(io.StringIO(text))] == [4, 5]

    def test_missing_alignment(self):
        with pytest.raises(UnalignedSentenceError):
            load_conllu(THEY_ATTACKED_HER.replace("# utt_index = 4\n", ""))

    def test_two_roots(self):
        with pytest.raises(ParseError):
            load_conllu(THEY_ATTACKED_HER.replace("\t2\tnsubj", "\t0\tnsubj"))

    def test_non_integer_head(self):
        with pytest.raises(ParseError):
            load_conllu(THEY_ATTACKED_HER.replace("\t2\tobj", "\tx\tobj"))

    def test_head_out_of_range(self):
        with pytest.raises(ParseError):
            load_conllu(THEY_ATTACKED_HER.replace("\t2\tobj", "\t9\tobj"))

    def test_wrong_column_count(self):
        with pytest.raises(ParseError):
            load_conllu("# movie_id = m\n# utt_index = 0\n1\tx\tx\n")


def test_dataset_round_trip():
    manifest = load_manifest("movie_id,title,genres,violence_label\nm1,Heat,Action|Crime,HIGH\n")
    sp = parse_screenplay("JOHN\nHi é.\n\nMARY\nBye.\n", "m1", "Heat", {"Action", "Crime"}, Violence.HIGH)
    sp2 = parse_screenplay("REX\nYo.\n", "m2")
    buf = io.StringIO()
    write_dataset([sp, sp2], buf)
    assert read_dataset(buf.getvalue(), manifest) == [sp, sp2]


def test_dataset_gap_rejected():
    text = '{"movie_id": "m", "index": 0, "speaker_id": "A", "text": "x"}\n' \
           '{"movie_id": "m", "index": 2, "speaker_id": "A", "text": "y"}\n'
    with pytest.raises(ParseError):
        read_dataset(text)
