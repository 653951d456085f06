"""Text formats: feature files (CSV blocks) and model banks (versioned JSON)."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from . import bhmm, tbm
from .corpus import Corpus, CorpusError
from .gmm import GMM
from .phmm import HmmParams
from .recognizer import BELIEF, KINDS, BankError, ModelBank

FEATURE_MAGIC = "beliefhmm-features"
FEATURE_VERSION = 1
BANK_FORMAT = "beliefhmm-bank"
BANK_VERSION = 1


class FormatError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Feature files

def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def dumps_features(corpus: Corpus) -> str:
    """One ``label,source,T,D`` header per item followed by ``T`` rows of ``D`` values."""
    lines = [f"{FEATURE_MAGIC} {FEATURE_VERSION}"]
    for it in corpus:
        for field in (it.label, it.source):
            if any(ch in field for ch in ",\n\r"):
                raise FormatError(f"label/source {field!r} contains a comma or newline")
        T, D = it.obs.shape
        lines.append(f"{it.label},{it.source},{T},{D}")
        lines.extend(",".join(_fmt(v) for v in row) for row in it.obs)
    return "\n".join(lines) + "\n"


def loads_features(text: str) -> Corpus:
    lines = text.splitlines()
    if not lines or lines[0].split() != [FEATURE_MAGIC, str(FEATURE_VERSION)]:
        raise FormatError(f"missing or unsupported feature-file header (want '{FEATURE_MAGIC} {FEATURE_VERSION}')")
    corpus = Corpus()
    i = 1
    while i < len(lines):
        if not lines[i].strip():
            i += 1
            continue
        head = lines[i].split(",")
        try:
            label, source, T, D = head[0], head[1], int(head[2]), int(head[3])
            if len(head) != 4 or T < 1 or D < 1:
                raise ValueError
        except (ValueError, IndexError):
            raise FormatError(f"line {i + 1}: malformed item header {lines[i]!r}") from None
        if i + T >= len(lines):
            raise FormatError(f"line {i + 1}: item {source!r} declares {T} rows but the file ends early")
        rows = []
        for k in range(T):
            n = i + 1 + k
            cells = lines[n].split(",")
            if len(cells) != D:
                raise FormatError(f"line {n + 1}: expected {D} values, got {len(cells)}")
            try:
                rows.append([float(c) for c in cells])
            except ValueError:
                raise FormatError(f"line {n + 1}: non-numeric value") from None
        try:
            corpus.add(label, np.array(rows), source)
        except CorpusError as exc:
            raise FormatError(f"line {i + 1}: {exc}") from None
        i += T + 1
    return corpus


def write_features(path, corpus: Corpus) -> None:
    Path(path).write_text(dumps_features(corpus), encoding="utf-8", newline="\n")


def read_features(path) -> Corpus:
    return loads_features(Path(path).read_text(encoding="utf-8"))


# ---------------------------------------------------------------------------
# Model banks

def _gmm_to_dict(g: GMM) -> dict:
    return {
        "weights": g.weights.tolist(),
        "means": g.means.tolist(),
        "variances": g.variances.tolist(),
        "shift": g.shift.tolist(),
        "scale": g.scale.tolist(),
    }


def _gmm_from_dict(d: dict) -> GMM:
    return GMM(d["weights"], d["means"], d["variances"], d["shift"], d["scale"])


def _prob_to_dict(p: HmmParams) -> dict:
    return {
        "transmat": p.transmat.tolist(),
        "startprob": p.startprob.tolist(),
        "mask": p.mask.astype(int).tolist(),
        "emissions": [_gmm_to_dict(g) for g in p.emissions],
    }


def _prob_from_dict(d: dict) -> HmmParams:
    return HmmParams(d["transmat"], d["startprob"], tuple(_gmm_from_dict(g) for g in d["emissions"]),
                     np.array(d["mask"], dtype=bool))


def _belief_to_dict(m: bhmm.BeliefHmm) -> dict:
    return {
        "states": m.n_states,
        "prior": m.prior.masses.tolist(),
        "transitions": m.transitions.table.tolist(),
        "pl_floor": m.pl_floor,
        "emissions": [_gmm_to_dict(g) for g in m.emissions],
    }


def _belief_from_dict(d: dict) -> bhmm.BeliefHmm:
    frame = tbm.Frame.of_size(int(d["states"]))
    return bhmm.BeliefHmm(
        tbm.BBA(frame, d["prior"]),
        tbm.ConditionalBBA(frame, frame, d["transitions"]),
        tuple(_gmm_from_dict(g) for g in d["emissions"]),
        float(d["pl_floor"]),
    )


def bank_to_dict(bank: ModelBank) -> dict:
    if bank.kind == BELIEF:
        classes = {label: [_belief_to_dict(m) for m in models] for label, models in bank.classes.items()}
    else:
        classes = {label: _prob_to_dict(m) for label, m in bank.classes.items()}
    return {"format": BANK_FORMAT, "version": BANK_VERSION, "kind": bank.kind, "classes": classes}


def bank_from_dict(d: dict) -> ModelBank:
    if not isinstance(d, dict) or d.get("format") != BANK_FORMAT:
        raise FormatError("not a model bank file")
    if d.get("version") != BANK_VERSION:
        raise FormatError(f"unsupported bank version {d.get('version')!r} (this build reads {BANK_VERSION})")
    for key in ("kind", "classes"):
        if key not in d:
            raise FormatError(f"bank file is missing the {key!r} block")
    kind, classes = d["kind"], d["classes"]
    if kind not in KINDS:
        raise FormatError(f"unknown bank kind {kind!r}")
    if not isinstance(classes, dict) or not classes:
        raise FormatError("bank file has no classes")
    try:
        if kind == BELIEF:
            models = {label: [_belief_from_dict(m) for m in ms] for label, ms in classes.items()}
        else:
            models = {label: _prob_from_dict(m) for label, m in classes.items()}
        return ModelBank(kind, models)
    except KeyError as exc:
        raise FormatError(f"model block is missing {exc}") from None
    except BankError as exc:
        raise FormatError(str(exc)) from None
    except (TypeError, ValueError) as exc:
        raise FormatError(f"invalid model block: {exc}") from None


def dumps_bank(bank: ModelBank) -> str:
    return json.dumps(bank_to_dict(bank), indent=1) + "\n"


def loads_bank(text: str) -> ModelBank:
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"bank file is not valid JSON: {exc}") from None
    return bank_from_dict(d)


def save_bank(path, bank: ModelBank) -> None:
    Path(path).write_text(dumps_bank(bank), encoding="utf-8", newline="\n")


def load_bank(path) -> ModelBank:
    return loads_bank(Path(path).read_text(encoding="utf-8"))
