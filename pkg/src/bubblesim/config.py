"""Config file parsing, validation, and the shipped presets.

Config files are INI-style key/value sections. Unknown sections or keys are
rejected with the offending line number; values parse into an
ExperimentConfig, which then enforces all cross-field invariants.
"""

from __future__ import annotations

import configparser
from pathlib import Path
from typing import Mapping

from .behavior import ClickModelParams, DriftConfig
from .corpus import CorpusSpec, Typology, TypologyTemplate, default_templates
from .errors import ConfigError
from .intervention import CalibrationParams
from .recommender import MFHyper
from .simulation import ExperimentConfig

KNOWN_KEYS: dict[str, set[str]] = {
    "corpus": {"n_articles", "multi_topic_prob", "max_topics_per_article"},
    "users": {"per_group", "templates_file"},
    "click": {"steepness", "midpoint"},
    "drift": {"influence"},
    "mf": {"latent_dim", "learning_rate", "l2_reg", "sgd_epochs", "init_scale", "warm_start"},
    "simulation": {
        "iterations",
        "retrain_every",
        "rec_k",
        "bootstrap_per_topic",
        "repeats",
        "base_seed",
        "workers",
    },
    "intervention": {"enabled", "lambda", "alpha", "pool", "target_scope"},
    "output": {"dump_models"},
}

PRESETS: dict[str, dict[str, dict[str, str]]] = {
    # Full scale of the reproduced experiments: 200 epochs of 200 interactions.
    "paper": {
        "corpus": {"n_articles": "40000"},
        "users": {"per_group": "100"},
        "simulation": {"iterations": "40000", "retrain_every": "200"},
    },
    # Minutes-not-hours scale: 40 epochs of 100 interactions.
    "desk": {
        "corpus": {"n_articles": "2000"},
        "users": {"per_group": "10"},
        "simulation": {"iterations": "4000", "retrain_every": "100"},
    },
}

_DEFAULTS: dict[str, dict[str, str]] = {
    "corpus": {"n_articles": "2000", "multi_topic_prob": "0.2", "max_topics_per_article": "2"},
    "users": {"per_group": "10", "templates_file": ""},
    "click": {"steepness": "10", "midpoint": "0.3"},
    "drift": {"influence": "0"},
    "mf": {
        "latent_dim": "16",
        "learning_rate": "0.05",
        "l2_reg": "0.01",
        "sgd_epochs": "10",
        "init_scale": "0.1",
        "warm_start": "false",
    },
    "simulation": {
        "iterations": "4000",
        "retrain_every": "100",
        "rec_k": "5",
        "bootstrap_per_topic": "10",
        "repeats": "10",
        "base_seed": "42",
        "workers": "1",
    },
    "intervention": {
        "enabled": "false",
        "lambda": "0.9",
        "alpha": "0.01",
        "pool": "50",
        "target_scope": "user",
    },
    "output": {"dump_models": "false"},
}


def _find_line(text: str, section: str | None, key: str | None) -> int:
    """Best-effort line number of a section header or key for error anchoring."""
    for number, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if key is not None:
            name = stripped.split("=")[0].split(":")[0].strip()
            if name == key:
                return number
        elif section is not None and stripped == f"[{section}]":
            return number
    return 0


def _parse_sections(text: str, source: str) -> dict[str, dict[str, str]]:
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from exc
    sections: dict[str, dict[str, str]] = {}
    for section in parser.sections():
        if section not in KNOWN_KEYS:
            raise ConfigError(f"{source}:{_find_line(text, section, None)}: unknown section [{section}]")
        for key, value in parser.items(section):
            if key not in KNOWN_KEYS[section]:
                raise ConfigError(
                    f"{source}:{_find_line(text, None, key)}: unknown key '{key}' in section [{section}]"
                )
            sections.setdefault(section, {})[key] = value
    return sections


def _get(values: Mapping[str, Mapping[str, str]], section: str, key: str) -> str:
    return values[section][key]


def _parse_int(values, section, key) -> int:
    raw = _get(values, section, key)
    try:
        return int(raw)
    except ValueError as exc:
        raise ConfigError(f"[{section}] {key}: expected an integer, got {raw!r}") from exc


def _parse_float(values, section, key) -> float:
    raw = _get(values, section, key)
    try:
        return float(raw)
    except ValueError as exc:
        raise ConfigError(f"[{section}] {key}: expected a number, got {raw!r}") from exc


def _parse_bool(values, section, key) -> bool:
    raw = _get(values, section, key).strip().lower()
    if raw in ("true", "1", "yes", "on"):
        return True
    if raw in ("false", "0", "no", "off"):
        return False
    raise ConfigError(f"[{section}] {key}: expected a boolean, got {raw!r}")


def parse_templates_file(path: Path) -> dict[Typology, TypologyTemplate]:
    """Template overrides: one section per typology with weights and concentration.

    Typologies not named in the file keep the shipped defaults.
    """
    text = Path(path).read_text()
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text, source=str(path))
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    valid_names = {t.value: t for t in Typology}
    templates = default_templates()
    for section in parser.sections():
        if section not in valid_names:
            raise ConfigError(f"{path}:{_find_line(text, section, None)}: unknown typology [{section}]")
        typology = valid_names[section]
        items = dict(parser.items(section))
        unknown = set(items) - {"weights", "concentration"}
        if unknown:
            raise ConfigError(f"{path}: [{section}]: unknown keys {sorted(unknown)}")
        if "weights" not in items:
            raise ConfigError(f"{path}: [{section}]: missing 'weights'")
        try:
            weights = tuple(float(w) for w in items["weights"].split())
        except ValueError as exc:
            raise ConfigError(f"{path}: [{section}]: weights must be 5 numbers") from exc
        concentration = float(items.get("concentration", "50"))
        templates[typology] = TypologyTemplate(typology, weights, concentration)
    return templates


def build_experiment_config(
    values: Mapping[str, Mapping[str, str]],
    config_dir: Path | None = None,
) -> ExperimentConfig:
    """Turn a fully-populated section map into a validated ExperimentConfig."""
    templates = default_templates()
    templates_file = _get(values, "users", "templates_file").strip()
    if templates_file:
        path = Path(templates_file)
        if config_dir is not None and not path.is_absolute():
            path = Path(config_dir) / path
        templates = parse_templates_file(path)

    config = ExperimentConfig(
        corpus=CorpusSpec(
            n_articles=_parse_int(values, "corpus", "n_articles"),
            multi_topic_prob=_parse_float(values, "corpus", "multi_topic_prob"),
            max_topics_per_article=_parse_int(values, "corpus", "max_topics_per_article"),
        ),
        per_group_users=_parse_int(values, "users", "per_group"),
        iterations=_parse_int(values, "simulation", "iterations"),
        retrain_every=_parse_int(values, "simulation", "retrain_every"),
        rec_k=_parse_int(values, "simulation", "rec_k"),
        bootstrap_per_topic=_parse_int(values, "simulation", "bootstrap_per_topic"),
        click=ClickModelParams(
            steepness=_parse_float(values, "click", "steepness"),
            midpoint=_parse_float(values, "click", "midpoint"),
        ),
        drift=DriftConfig(influence=_parse_float(values, "drift", "influence")),
        mf=MFHyper(
            latent_dim=_parse_int(values, "mf", "latent_dim"),
            learning_rate=_parse_float(values, "mf", "learning_rate"),
            l2_reg=_parse_float(values, "mf", "l2_reg"),
            sgd_epochs=_parse_int(values, "mf", "sgd_epochs"),
            init_scale=_parse_float(values, "mf", "init_scale"),
            warm_start=_parse_bool(values, "mf", "warm_start"),
        ),
        calibration=CalibrationParams(
            lam=_parse_float(values, "intervention", "lambda"),
            alpha=_parse_float(values, "intervention", "alpha"),
            candidate_pool=_parse_int(values, "intervention", "pool"),
        ),
        calibration_enabled=_parse_bool(values, "intervention", "enabled"),
        calibration_scope=_get(values, "intervention", "target_scope").strip(),
        repeats=_parse_int(values, "simulation", "repeats"),
        base_seed=_parse_int(values, "simulation", "base_seed"),
        templates=templates,
        workers=_parse_int(values, "simulation", "workers"),
        dump_models=_parse_bool(values, "output", "dump_models"),
    )
    config.validate()
    return config


def load_config(
    config_path: Path | None = None,
    preset: str | None = None,
    seed_override: int | None = None,
) -> ExperimentConfig:
    """Defaults, then preset, then config file, then the seed override."""
    values = {section: dict(keys) for section, keys in _DEFAULTS.items()}
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(f"unknown preset {preset!r}; available: {', '.join(sorted(PRESETS))}")
        for section, keys in PRESETS[preset].items():
            values[section].update(keys)
    config_dir = None
    if config_path is not None:
        path = Path(config_path)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        config_dir = path.parent
        for section, keys in _parse_sections(path.read_text(), str(path)).items():
            values[section].update(keys)
    if seed_override is not None:
        if seed_override < 0:
            raise ConfigError(f"seed must be >= 0, got {seed_override}")
        values["simulation"]["base_seed"] = str(seed_override)
    return build_experiment_config(values, config_dir)


def resolved_config_text(config: ExperimentConfig) -> str:
    """Canonical INI rendering of a validated config (hashed into manifests)."""
    templates_lines = []
    defaults = default_templates()
    if any(config.templates[t] != defaults[t] for t in Typology):
        for typology in Typology:
            template = config.templates[typology]
            weights = " ".join(format(w, ".9g") for w in template.base_weights)
            templates_lines.append(
                f"# template {typology.value}: weights = {weights}; concentration = {format(template.concentration, '.9g')}"
            )
    lines = [
        "[corpus]",
        f"n_articles = {config.corpus.n_articles}",
        f"multi_topic_prob = {format(config.corpus.multi_topic_prob, '.9g')}",
        f"max_topics_per_article = {config.corpus.max_topics_per_article}",
        "",
        "[users]",
        f"per_group = {config.per_group_users}",
        *templates_lines,
        "",
        "[click]",
        f"steepness = {format(config.click.steepness, '.9g')}",
        f"midpoint = {format(config.click.midpoint, '.9g')}",
        "",
        "[drift]",
        f"influence = {format(config.drift.influence, '.9g')}",
        "",
        "[mf]",
        f"latent_dim = {config.mf.latent_dim}",
        f"learning_rate = {format(config.mf.learning_rate, '.9g')}",
        f"l2_reg = {format(config.mf.l2_reg, '.9g')}",
        f"sgd_epochs = {config.mf.sgd_epochs}",
        f"init_scale = {format(config.mf.init_scale, '.9g')}",
        f"warm_start = {str(config.mf.warm_start).lower()}",
        "",
        "[simulation]",
        f"iterations = {config.iterations}",
        f"retrain_every = {config.retrain_every}",
        f"rec_k = {config.rec_k}",
        f"bootstrap_per_topic = {config.bootstrap_per_topic}",
        f"repeats = {config.repeats}",
        f"base_seed = {config.base_seed}",
        f"workers = {config.workers}",
        "",
        "[intervention]",
        f"enabled = {str(config.calibration_enabled).lower()}",
        f"lambda = {format(config.calibration.lam, '.9g')}",
        f"alpha = {format(config.calibration.alpha, '.9g')}",
        f"pool = {config.calibration.candidate_pool}",
        f"target_scope = {config.calibration_scope}",
        "",
        "[output]",
        f"dump_models = {str(config.dump_models).lower()}",
    ]
    return "\n".join(lines) + "\n"
