"""Deterministic generator for gold-annotated prescription-like corpora.

Documents are template-realised with exact gold offsets, in either schema
profile. Text is simplified French-flavoured prose (accented drug and context
words) so multi-byte offsets are exercised end to end. Link types follow
fixed lexical cues ("débuté le" starts, "arrêté le" stops, ...), the generic
attribute link dominating the mixture. Multi-frame drugs follow the
two-period pattern: one route and frequency per period, with the route and
the boundary date shared between the two frames; frame membership is encoded
in the emitted SAME_FRAME edges (complete graph per frame).
"""

from __future__ import annotations

import json
import os
import random
from dataclasses import asdict, dataclass

from .frames import Frame, FrameSet, frames_to_relations
from .schema import SAME_FRAME, SchemaProfile, resolve_profile
from .standoff import Document, Entity, Relation, write_corpus_dir

DRUGS = (
    "méthotrexate", "tocilizumab", "prednisone", "hydroxychloroquine",
    "léflunomide", "adalimumab", "étanercept", "rituximab", "abatacept",
    "sulfasalazine", "infliximab", "baricitinib",
)
DRUG_CLASSES = ("corticoïdes", "anti-TNF", "AINS", "biothérapie")
ROUTES = ("IV", "orale", "sous-cutanée", "intramusculaire")
FREQUENCIES = (
    "toutes les 4 semaines", "toutes les 2 semaines", "une fois par jour",
    "deux fois par jour", "une fois par semaine", "tous les mois",
)
DATES = (
    "janvier 2023", "février 2023", "mars 2023", "avril 2023", "mai 2023",
    "juin 2023", "juillet 2023", "août 2023", "septembre 2023",
    "octobre 2023", "novembre 2023", "décembre 2023",
)
RELATIVE_DATES = ("3 mois", "6 semaines", "un an", "quinze jours")
DOSAGES = ("500 mg", "10 mg", "20 mg", "1 g", "200 mg", "15 mg", "50 mg", "160 mg")
DURATIONS = ("3 mois", "6 semaines", "un an", "15 jours")
FORMS = ("comprimé", "injection", "gélule", "solution")
REASONS = ("polyarthrite", "douleurs", "inflammation", "poussée")
ADES = ("nausées", "éruption cutanée", "céphalées", "neutropénie")

FILLERS = (
    "Le patient va bien.",
    "Examen clinique sans particularité.",
    "Bonne tolérance globale du traitement.",
    "Évolution favorable depuis la dernière consultation.",
)
PADS = (
    "dans le cadre du suivi",
    "après avis spécialisé",
    "en raison de l'activité de la maladie",
    "avec une bonne tolérance",
    "selon le protocole habituel",
    "au vu de l'évolution clinique",
)
PADS_EN = (
    "as part of the discharge plan",
    "per rheumatology recommendation",
    "with close monitoring",
    "as previously discussed",
)


class GenerationError(ValueError):
    """Invalid generator configuration."""


@dataclass(frozen=True)
class GenConfig:
    seed: int = 0
    doc_count: int = 50
    sentences_min: int = 3
    sentences_max: int = 8
    schema_name: str = "corp-hus"
    multi_frame_rate: float = 0.04
    context_relation_rate: float = 0.5
    filler_rate: float = 0.25
    drugs: tuple[str, ...] = DRUGS
    drug_classes: tuple[str, ...] = DRUG_CLASSES
    routes: tuple[str, ...] = ROUTES
    frequencies: tuple[str, ...] = FREQUENCIES
    dates: tuple[str, ...] = DATES
    relative_dates: tuple[str, ...] = RELATIVE_DATES
    dosages: tuple[str, ...] = DOSAGES
    durations: tuple[str, ...] = DURATIONS
    forms: tuple[str, ...] = FORMS
    reasons: tuple[str, ...] = REASONS
    ades: tuple[str, ...] = ADES

    def __post_init__(self):
        for name in ("multi_frame_rate", "context_relation_rate", "filler_rate"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise GenerationError(f"{name} must lie in [0, 1], got {value}")
        if self.doc_count < 0:
            raise GenerationError("doc_count must be non-negative")
        if not 1 <= self.sentences_min <= self.sentences_max:
            raise GenerationError("need 1 <= sentences_min <= sentences_max")
        for name in ("drugs", "routes", "frequencies", "dates", "dosages"):
            if not getattr(self, name):
                raise GenerationError(f"vocabulary table {name!r} may not be empty")

    def schema(self) -> SchemaProfile:
        return resolve_profile(self.schema_name)


class _Sentence:
    """Accumulates one sentence's text and locally indexed entities."""

    def __init__(self):
        self._chunks: list[str] = []
        self._pos = 0
        self.entities: list[tuple[str, int, int, str]] = []  # etype, start, end, surface
        self.links: list[tuple[int, str]] = []  # (local attribute index, rtype)
        self.drug: int | None = None
        self.frames: list[list[int]] | None = None

    def lit(self, text: str) -> None:
        self._chunks.append(text)
        self._pos += len(text)

    def ent(self, etype: str, surface: str) -> int:
        start = self._pos
        self.lit(surface)
        self.entities.append((etype, start, start + len(surface), surface))
        return len(self.entities) - 1

    def text(self) -> str:
        return "".join(self._chunks)


_DATE_CUES = [("débuté le ", "Start"), ("arrêté le ", "Stop"), ("poursuivi en ", "Ongoing")]


def _regimen_sentence(rng: random.Random, cfg: GenConfig, drug_pool: tuple[str, ...], drug_type: str) -> _Sentence:
    s = _Sentence()
    s.lit(rng.choice((
        "Patient traité par ",
        "Dans les suites de la consultation, le patient reçoit ",
        "Sur le plan thérapeutique, poursuite de ",
        "À l'issue du bilan, introduction de ",
    )))
    s.drug = s.ent(drug_type, rng.choice(drug_pool))
    if rng.random() < 0.6:
        s.lit(" ")
        s.links.append((s.ent("Dosage", rng.choice(cfg.dosages)), "Refer_to"))
    if rng.random() < 0.45:
        s.lit(" en ")
        s.links.append((s.ent("Route", rng.choice(cfg.routes)), "Refer_to"))
    if rng.random() < 0.45:
        s.lit(" ")
        s.links.append((s.ent("Frequency", rng.choice(cfg.frequencies)), "Refer_to"))
    if rng.random() < cfg.context_relation_rate:
        cue, rtype = rng.choice(_DATE_CUES)
    else:
        cue, rtype = "prescrit le ", "Refer_to"
    s.lit(", " + cue)
    s.links.append((s.ent("Date", rng.choice(cfg.dates)), rtype))
    if rng.random() < 0.85:
        s.lit(" " + rng.choice(PADS))
    if rng.random() < 0.5:
        s.lit(" et " + rng.choice(PADS))
    s.lit(".")
    return s


def _multi_frame_sentence(rng: random.Random, cfg: GenConfig) -> _Sentence:
    s = _Sentence()
    s.lit("Traitement par ")
    s.drug = s.ent("Drug", rng.choice(cfg.drugs))
    s.lit(" en ")
    route = s.ent("Route", rng.choice(cfg.routes))
    s.lit(" ")
    freq1 = s.ent("Frequency", rng.choice(cfg.frequencies))
    s.lit(" de ")
    date1 = s.ent("Date", rng.choice(cfg.dates))
    s.lit(" à ")
    date2 = s.ent("Date", rng.choice(cfg.dates))
    s.lit(", puis ")
    freq2 = s.ent("Frequency", rng.choice(cfg.frequencies))
    s.lit(" jusqu'à ")
    date3 = s.ent("Date", rng.choice(cfg.dates))
    s.lit(".")
    for attr in (route, freq1, date1, date2, freq2, date3):
        s.links.append((attr, "Refer_to"))
    s.frames = [[route, freq1, date1, date2], [route, freq2, date2, date3]]
    return s


def _simple_special(rng: random.Random, cfg: GenConfig, kind: str) -> _Sentence:
    s = _Sentence()
    if kind == "increase" or kind == "decrease":
        s.lit("Majoration de " if kind == "increase" else "Diminution de ")
        s.drug = s.ent("Drug", rng.choice(cfg.drugs))
        s.lit(" à ")
        s.links.append((s.ent("Dosage", rng.choice(cfg.dosages)), "Increase" if kind == "increase" else "Decrease"))
        if rng.random() < 0.6:
            s.lit(" " + rng.choice(PADS))
        s.lit(".")
    elif kind == "negation":
        ctx = s.ent("Context", "Pas de")
        s.lit(" reprise de ")
        s.drug = s.ent("Drug", rng.choice(cfg.drugs))
        s.lit(" ")
        s.links.append((s.ent("Dosage", rng.choice(cfg.dosages)), "Refer_to"))
        s.lit(".")
        s.links.append((ctx, "Negation"))
    elif kind == "hypothetical":
        ctx = s.ent("Context", "Hypothèse")
        s.lit(" d'un passage à ")
        s.drug = s.ent("Drug", rng.choice(cfg.drugs))
        s.lit(" à discuter.")
        s.links.append((ctx, "Hypothetical"))
    elif kind == "contraindicated":
        ctx = s.ent("Context", "Contre-indication")
        s.lit(" à ")
        s.drug = s.ent("Drug", rng.choice(cfg.drugs))
        s.lit(" retenue.")
        s.links.append((ctx, "Contraindicated"))
    elif kind == "duration":
        s.lit("Prescription de ")
        s.drug = s.ent("Drug", rng.choice(cfg.drugs))
        s.lit(" ")
        s.links.append((s.ent("Dosage", rng.choice(cfg.dosages)), "Refer_to"))
        s.lit(" pendant ")
        s.links.append((s.ent("Duration", rng.choice(cfg.durations)), "Duration_prescription"))
        if rng.random() < 0.5:
            s.lit(" " + rng.choice(PADS))
        s.lit(".")
    elif kind == "relative":
        s.lit("Introduction de ")
        s.drug = s.ent("Drug", rng.choice(cfg.drugs))
        s.lit(" il y a ")
        s.links.append((s.ent("Relative_Date", rng.choice(cfg.relative_dates)), "Start"))
        s.lit(".")
    else:
        raise AssertionError(kind)
    return s


_SPECIAL_KINDS = ("increase", "decrease", "negation", "hypothetical", "contraindicated", "duration", "relative")


def _corp_hus_sentence(rng: random.Random, cfg: GenConfig) -> _Sentence:
    if rng.random() < cfg.multi_frame_rate:
        return _multi_frame_sentence(rng, cfg)
    roll = rng.random()
    if roll < 0.70:
        if rng.random() < 0.08:
            return _regimen_sentence(rng, cfg, cfg.drug_classes, "Drug_Class")
        return _regimen_sentence(rng, cfg, cfg.drugs, "Drug")
    return _simple_special(rng, cfg, rng.choice(_SPECIAL_KINDS))


def _n2c2_regimen(rng: random.Random, cfg: GenConfig) -> _Sentence:
    s = _Sentence()
    s.lit(rng.choice(("Patient was started on ", "Continue ", "She was given ")))
    s.drug = s.ent("Drug", rng.choice(cfg.drugs))
    if rng.random() < 0.6:
        s.lit(" ")
        s.links.append((s.ent("Strength", rng.choice(cfg.dosages)), "Strength-Drug"))
    if rng.random() < 0.4:
        s.lit(" ")
        s.links.append((s.ent("Form", rng.choice(cfg.forms)), "Form-Drug"))
    if rng.random() < 0.45:
        s.lit(" ")
        s.links.append((s.ent("Route", rng.choice(cfg.routes)), "Route-Drug"))
    if rng.random() < 0.5:
        s.lit(" ")
        s.links.append((s.ent("Frequency", rng.choice(cfg.frequencies)), "Frequency-Drug"))
    if rng.random() < cfg.context_relation_rate:
        s.lit(" for ")
        s.links.append((s.ent("Reason", rng.choice(cfg.reasons)), "Reason-Drug"))
    if rng.random() < 0.5:
        s.lit(" " + rng.choice(PADS_EN))
    s.lit(".")
    return s


def _n2c2_multi_frame(rng: random.Random, cfg: GenConfig) -> _Sentence:
    s = _Sentence()
    s.lit("Plan: ")
    s.drug = s.ent("Drug", rng.choice(cfg.drugs))
    s.lit(" ")
    strength1 = s.ent("Strength", rng.choice(cfg.dosages))
    s.lit(" for ")
    duration1 = s.ent("Duration", rng.choice(cfg.durations))
    s.lit(", then ")
    strength2 = s.ent("Strength", rng.choice(cfg.dosages))
    s.lit(" for ")
    duration2 = s.ent("Duration", rng.choice(cfg.durations))
    s.lit(".")
    s.links.extend([(strength1, "Strength-Drug"), (duration1, "Duration-Drug"),
                    (strength2, "Strength-Drug"), (duration2, "Duration-Drug")])
    s.frames = [[strength1, duration1], [strength2, duration2]]
    return s


def _n2c2_ade(rng: random.Random, cfg: GenConfig) -> _Sentence:
    s = _Sentence()
    s.lit("Patient developed ")
    ade = s.ent("ADE", rng.choice(cfg.ades))
    s.lit(" attributed to ")
    s.drug = s.ent("Drug", rng.choice(cfg.drugs))
    s.lit(".")
    s.links.append((ade, "ADE-Drug"))
    return s


def _n2c2_sentence(rng: random.Random, cfg: GenConfig) -> _Sentence:
    if rng.random() < cfg.multi_frame_rate:
        return _n2c2_multi_frame(rng, cfg)
    if rng.random() < 0.12:
        return _n2c2_ade(rng, cfg)
    return _n2c2_regimen(rng, cfg)


def _lone_date_sentence(rng: random.Random, cfg: GenConfig, schema: SchemaProfile) -> _Sentence:
    s = _Sentence()
    if "Date" in schema.entity_types:
        s.lit("Consultation du ")
        s.ent("Date", rng.choice(cfg.dates))
        s.lit(".")
    else:
        s.lit("Follow-up in ")
        s.ent("Duration", rng.choice(cfg.durations))
        s.lit(".")
    return s


def _generate_document(index: int, cfg: GenConfig, schema: SchemaProfile) -> Document:
    rng = random.Random(f"{cfg.seed}:{index}")
    sentence_count = rng.randint(cfg.sentences_min, cfg.sentences_max)
    sentences: list[_Sentence] = []
    for _ in range(sentence_count):
        roll = rng.random()
        if roll < cfg.filler_rate:
            filler = _Sentence()
            filler.lit(rng.choice(FILLERS))
            sentences.append(filler)
        elif roll < cfg.filler_rate + 0.07:
            sentences.append(_lone_date_sentence(rng, cfg, schema))
        elif schema.name == "n2c2":
            sentences.append(_n2c2_sentence(rng, cfg))
        else:
            sentences.append(_corp_hus_sentence(rng, cfg))

    chunks: list[str] = []
    entities: list[Entity] = []
    relations: list[Relation] = []
    frames: list[Frame] = []
    offset = 0
    for s in sentences:
        local_ids: list[str] = []
        for etype, start, end, surface in s.entities:
            eid = f"T{len(entities) + 1}"
            local_ids.append(eid)
            entities.append(Entity(eid, etype, offset + start, offset + end, surface))
        drug_id = local_ids[s.drug] if s.drug is not None else None
        if drug_id is not None:
            links = [(local_ids[attr], rtype) for attr, rtype in s.links]
            for attr_id, rtype in links:
                relations.append(Relation(f"R{len(relations) + 1}", rtype, attr_id, drug_id))
            if s.frames is None:
                frames.append(Frame(drug_id, tuple(links)))
            else:
                rtypes = dict(links)
                for group in s.frames:
                    frames.append(Frame(drug_id, tuple((local_ids[a], rtypes[local_ids[a]]) for a in group)))
        chunks.append(s.text())
        offset += len(s.text()) + 1  # newline separator
    text = "\n".join(chunks) + ("\n" if chunks else "")

    frame_counts: dict[str, int] = {}
    for f in frames:
        frame_counts[f.drug] = frame_counts.get(f.drug, 0) + 1
    multi = FrameSet(
        f"doc{index:04d}",
        tuple(f for f in frames if frame_counts[f.drug] >= 2),
    )
    seen = {(r.rtype, r.source, r.target) for r in relations}
    n_sf = 0
    for r in frames_to_relations(multi, include_same_frame=True):
        if r.rtype != SAME_FRAME:
            continue
        triple = (SAME_FRAME, r.source, r.target)
        if triple in seen:
            continue
        seen.add(triple)
        n_sf += 1
        relations.append(Relation(f"SF{n_sf}", SAME_FRAME, r.source, r.target))
    return Document(f"doc{index:04d}", text, tuple(entities), tuple(relations))


def generate_corpus(cfg: GenConfig) -> list[Document]:
    """Deterministic under the seed; per-document derived seeds keep it parallel-safe.

    Only multi-frame drugs carry SAME_FRAME edges (one complete graph per
    frame); single-frame drugs need none, because attributes without edges
    form one frame by default.
    """
    schema = cfg.schema()
    return [_generate_document(i, cfg, schema) for i in range(cfg.doc_count)]


def corpus_split(corpus: list[Document], train_fraction: float, seed: int) -> tuple[list[Document], list[Document]]:
    """Seeded shuffle, then a document-granular cut: disjoint and exhaustive."""
    if not 0.0 < train_fraction < 1.0:
        raise GenerationError(f"train_fraction must lie strictly inside (0, 1), got {train_fraction}")
    order = list(corpus)
    random.Random(seed).shuffle(order)
    cut = int(len(order) * train_fraction)
    return order[:cut], order[cut:]


def write_corpus(docs: list[Document], out_dir: str, cfg: GenConfig) -> None:
    """Write .txt/.ann pairs plus a manifest (seed, config echo, stats); no volatile fields."""
    from .stats import corpus_stats

    write_corpus_dir(docs, out_dir)
    manifest = {
        "seed": cfg.seed,
        "config": asdict(cfg),
        "stats": corpus_stats(docs, cfg.schema()).to_dict(),
    }
    path = os.path.join(out_dir, "manifest.json")
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, ensure_ascii=False, indent=2, sort_keys=True)
        fh.write("\n")
    os.replace(tmp, path)
