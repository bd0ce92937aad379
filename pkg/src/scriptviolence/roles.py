"""Subject-verb-object triplets, participant resolution and victim/perpetrator/narrator roles."""
from __future__ import annotations

import csv
import enum
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .errors import GatingError, ValidationError
from .ingest import DemographicRecord, Gender, ParsedSentence, Race, Token, Utterance, Violence, normalize_speaker


class Form(enum.Enum):
    PVN = "PVN"
    PVP = "PVP"
    NVN = "NVN"
    PVPN = "PVPN"
    OTHER = "OTHER"


class Role(enum.Enum):
    VICTIM = "VICTIM"
    PERPETRATOR = "PERPETRATOR"
    NARRATOR = "NARRATOR"


DIRECTIONAL_FORMS = (Form.PVP, Form.PVPN)

_FORMS = {
    ("PRON", "NOUN"): Form.PVN,
    ("PRON", "PRON"): Form.PVP,
    ("NOUN", "NOUN"): Form.NVN,
    ("PRON", "PROPN"): Form.PVPN,
}

SUBJECT_RELS = {"nsubj", "nsubj:pass"}
OBJECT_RELS = {"obj", "dobj"}
AGENT_RELS = {"obl:agent"}


@dataclass(frozen=True)
class Mention:
    surface: str
    upos: str
    coref: str | None = None  # Coref=<character_id> from the MISC column


@dataclass(frozen=True)
class SvoTriplet:
    movie_id: str
    utterance_index: int
    subject: Mention
    verb_lemma: str
    object: Mention
    form: Form
    passive: bool = False


def triplet_form(subject_upos: str, object_upos: str) -> Form:
    return _FORMS.get((subject_upos, object_upos), Form.OTHER)


def _mention(tok: Token) -> Mention:
    coref = tok.misc.get("Coref")
    return Mention(tok.surface, tok.upos, normalize_speaker(coref) if coref else None)


def _is_by_agent(tok: Token, sentence: ParsedSentence) -> bool:
    if tok.deprel in AGENT_RELS:
        return True
    return tok.deprel == "obl" and any(
        c.deprel == "case" and c.lemma.lower() == "by" for c in sentence.children(tok.id))


def extract_svo(sentence: ParsedSentence) -> list[SvoTriplet]:
    """One triplet per (verb, subject, object) combination, passives turned active.

    Active clauses pair ``nsubj`` with ``obj``/``dobj``. A clause with an
    ``nsubj:pass`` subject pairs the by-agent oblique (``obl:agent``, or
    ``obl`` carrying a ``by`` case marker) as the acting subject with the
    passive subject as the object.
    """
    out = []
    for verb in sentence.tokens:
        if verb.upos != "VERB":
            continue
        deps = sentence.children(verb.id)
        active_subj = [t for t in deps if t.deprel == "nsubj"]
        passive_subj = [t for t in deps if t.deprel == "nsubj:pass"]
        objects = [t for t in deps if t.deprel in OBJECT_RELS]
        agents = [t for t in deps if _is_by_agent(t, sentence)] if passive_subj else []
        pairs = [(s, o, False) for s in active_subj for o in objects]
        pairs += [(a, s, True) for s in passive_subj for a in agents]
        for subj, obj, passive in pairs:
            out.append(SvoTriplet(sentence.movie_id, sentence.utt_index, _mention(subj), verb.lemma,
                                  _mention(obj), triplet_form(subj.upos, obj.upos), passive))
    return out


def filter_forms(triplets: Iterable[SvoTriplet]) -> list[SvoTriplet]:
    """Keep pronoun-verb-pronoun and pronoun-verb-proper-noun triplets."""
    return [t for t in triplets if t.form in DIRECTIONAL_FORMS]


def form_distribution(triplets: Sequence[SvoTriplet]) -> dict[Form, float]:
    """Percentage of triplets per form (all five forms listed)."""
    if not triplets:
        raise ValidationError("form distribution of an empty triplet list")
    counts = Counter(t.form for t in triplets)
    n = len(triplets)
    return {f: 100.0 * counts[f] / n for f in Form}


# --------------------------------------------------------------------------
# resolution

FIRST_PERSON = frozenset({"i", "me", "we", "us", "my", "myself"})
SECOND_PERSON = frozenset({"you", "your", "yourself"})
ADDRESSEE_REACH = 2


def addressee(utterance: Utterance, utterances: Sequence[Utterance]) -> str | None:
    """Speaker of the nearest other-speaker utterance within two steps, looking back first."""
    t = utterance.index
    for step in range(1, ADDRESSEE_REACH + 1):
        j = t - step
        if 0 <= j < len(utterances) and utterances[j].speaker_id != utterance.speaker_id:
            return utterances[j].speaker_id
    for step in range(1, ADDRESSEE_REACH + 1):
        j = t + step
        if j < len(utterances) and utterances[j].speaker_id != utterance.speaker_id:
            return utterances[j].speaker_id
    return None


def resolve_mention(mention: Mention, utterance: Utterance, utterances: Sequence[Utterance],
                    roster: Iterable[str], use_coref: bool = True) -> str | None:
    word = mention.surface.lower()
    if mention.upos == "PRON":
        if word in FIRST_PERSON:
            return utterance.speaker_id
        if word in SECOND_PERSON:
            return addressee(utterance, utterances)
        return mention.coref if use_coref else None
    if mention.upos == "PROPN":
        name = normalize_speaker(mention.surface)
        return name if name in set(roster) else None
    return None


def resolve_participants(triplet: SvoTriplet, utterance: Utterance, utterances: Sequence[Utterance],
                         roster: Iterable[str], use_coref: bool = True) -> tuple[str | None, str | None]:
    """Map subject and object to character ids; ``None`` where unresolved.

    ``utterances`` is the movie's full dialogue, indexed by position, used
    for the second-person addressee lookup.
    """
    if (triplet.movie_id, triplet.utterance_index) != (utterance.movie_id, utterance.index):
        raise ValidationError("triplet does not belong to this utterance")
    roster = set(roster)
    return (resolve_mention(triplet.subject, utterance, utterances, roster, use_coref),
            resolve_mention(triplet.object, utterance, utterances, roster, use_coref))


@dataclass(frozen=True)
class RoleAssignment:
    triplet: SvoTriplet
    speaker_id: str
    speaker_role: Role
    perpetrator_id: str | None
    victim_id: str | None
    violence_level: Violence

    @property
    def has_pair(self) -> bool:
        return self.perpetrator_id is not None and self.victim_id is not None

    def row(self) -> list[str]:
        return [self.triplet.movie_id, str(self.triplet.utterance_index), self.speaker_id,
                self.speaker_role.name, self.triplet.verb_lemma, self.perpetrator_id or "-",
                self.victim_id or "-", self.violence_level.name]


ROLE_HEADER = ["movie_id", "utterance_index", "speaker_id", "speaker_role", "verb_lemma",
               "perpetrator_id", "victim_id", "violence_level"]


def assign_role(triplet: SvoTriplet, resolution: tuple[str | None, str | None], speaker_id: str,
                violence_level: Violence) -> RoleAssignment:
    """Speaker is perpetrator if they are the subject, victim if only the object, else narrator."""
    if violence_level not in (Violence.MED, Violence.HIGH):
        raise GatingError(f"role assignment requires MED or HIGH violence, got {violence_level!r}")
    subj, obj = resolution
    if subj == speaker_id:
        return RoleAssignment(triplet, speaker_id, Role.PERPETRATOR, speaker_id, obj, violence_level)
    if obj == speaker_id:
        return RoleAssignment(triplet, speaker_id, Role.VICTIM, subj, speaker_id, violence_level)
    return RoleAssignment(triplet, speaker_id, Role.NARRATOR, subj, obj, violence_level)


@dataclass(frozen=True)
class InteractionPair:
    movie_id: str
    perpetrator_id: str
    victim_id: str
    perpetrator_demo: tuple[Gender, Race]
    victim_demo: tuple[Gender, Race]
    violence_level: Violence

    def row(self) -> list[str]:
        return [self.perpetrator_id, self.perpetrator_demo[0].name, self.perpetrator_demo[1].name,
                self.victim_id, self.victim_demo[0].name, self.victim_demo[1].name, self.violence_level.name]


INTERACTION_HEADER = ["perpetrator_id", "perp_gender", "perp_race", "victim_id", "vic_gender", "vic_race",
                      "violence_level"]


def _demo(demographics: Mapping[tuple[str, str], DemographicRecord], movie_id: str, char: str):
    rec = demographics.get((movie_id, char))
    return (rec.gender, rec.race) if rec else (Gender.UNKNOWN, Race.UNKNOWN)


def collect_interactions(assignments: Iterable[RoleAssignment],
                         demographics: Mapping[tuple[str, str], DemographicRecord]) -> list[InteractionPair]:
    """One pair per assignment with both participants resolved."""
    out = []
    for a in assignments:
        if not a.has_pair:
            continue
        mid = a.triplet.movie_id
        out.append(InteractionPair(mid, a.perpetrator_id, a.victim_id, _demo(demographics, mid, a.perpetrator_id),
                                   _demo(demographics, mid, a.victim_id), a.violence_level))
    return out


# --------------------------------------------------------------------------
# movie-level driver


@dataclass
class RoleRun:
    triplets: list[SvoTriplet]  # every triplet from gated utterances, before form filtering
    assignments: list[RoleAssignment]


def movie_roles(utterances: Sequence[Utterance], sentences: Iterable[ParsedSentence],
                predicted: Mapping[int, Violence], roster: Iterable[str] | None = None) -> RoleRun:
    """Run extraction, form filtering, resolution and role assignment for one movie.

    Only utterances whose predicted class is MED or HIGH contribute; parses
    of LOW or unclassified utterances are skipped before extraction.
    """
    # the addressee lookup walks neighbours by index, so input order must not matter
    utterances = sorted(utterances, key=lambda u: u.index)
    if [u.index for u in utterances] != list(range(len(utterances))):
        raise ValidationError("utterance indices must run 0..n-1 without gaps")
    roster = set(roster if roster is not None else (u.speaker_id for u in utterances))
    triplets, assignments = [], []
    for sent in sorted(sentences, key=lambda s: s.utt_index):
        level = predicted.get(sent.utt_index)
        if level not in (Violence.MED, Violence.HIGH):
            continue
        if sent.utt_index >= len(utterances):
            raise ValidationError(f"{sent.movie_id}: parse for utterance {sent.utt_index} beyond dialogue length")
        utt = utterances[sent.utt_index]
        found = extract_svo(sent)
        triplets.extend(found)
        for trip in filter_forms(found):
            res = resolve_participants(trip, utt, utterances, roster)
            assignments.append(assign_role(trip, res, utt.speaker_id, level))
    return RoleRun(triplets, assignments)


def read_roles(stream) -> list[RoleAssignment]:
    """Read a role file back into assignments.

    The file keeps only the verb lemma of each triplet, so the rebuilt
    triplets carry placeholder mentions and form OTHER.
    """
    reader = csv.reader(stream)
    if next(reader, None) != ROLE_HEADER:
        raise ValidationError(f"role file must start with header {','.join(ROLE_HEADER)}")
    out = []
    blank = Mention("-", "X")
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        try:
            movie_id, idx, speaker, role, verb, perp, victim, level = row
            trip = SvoTriplet(movie_id, int(idx), blank, verb, blank, Form.OTHER)
            out.append(RoleAssignment(trip, speaker, Role[role], None if perp == "-" else perp,
                                      None if victim == "-" else victim, Violence.parse(level)))
        except (ValueError, KeyError):
            raise ValidationError(f"role file line {lineno}: malformed record") from None
    return out
