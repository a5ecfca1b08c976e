from dotenv import load_dotenv
from pathlib import Path
import configparser
import os
from typing import Literal

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

# --- Load .env from actual project root ---
BASE_DIR = Path(__file__).parent.parent
load_dotenv(dotenv_path=BASE_DIR / ".env")

# --- Paths ---
APP_DIR = BASE_DIR / "app"
RESOURCES_DIR = APP_DIR / "resources"
LBCS_DIR = RESOURCES_DIR / "lbcs"
SYNTH_DIR = RESOURCES_DIR / "synth"

TAXONOMY_PATH = LBCS_DIR / "taxonomy.csv"
CROSSWALK_PATHS = [LBCS_DIR / "crosswalk_poi.csv", LBCS_DIR / "crosswalk_osm.csv"]
AUTHORITATIVE_CROSSWALK_PATH = LBCS_DIR / "authoritative.csv"
SYNTH_PARAMS_PATH = SYNTH_DIR / "params.ini"

# --- Assignment ---
DEFAULT_RADIUS = 10.0          # meters, nearest-footprint fallback for point records
DISTANCE_TIE_TOLERANCE = 1e-9  # meters; nearer candidates within this count as equidistant
EARTH_RADIUS_M = 6_371_000.0   # equirectangular projection

# --- Inputs ---
DEFAULT_ID_PROPERTY = "mapblklot"
DEFAULT_CLASS_PROPERTY = "landuse"
POI_CSV_COLUMNS = ("id", "lat", "lon", "type")
KNOWN_SOURCES = ("google", "bing", "yellowpages", "osm")
SOURCE_FORMATS = ("poi_csv", "osm_xml", "geojson")

DATASF_CLASSES = (
    "CIE", "MED", "MIPS", "MIXED", "MIXRES",
    "PDR", "RETAIL/ENT", "RESIDENT", "VISITOR", "VACANT",
)

# --- Outputs ---
DEFAULT_OUTPUT_DIR = "out"
SYNTH_OUTPUT_DIR = "fixture"
VALIDITY_CSV = "validity.csv"
VALIDITY_MD = "validity.md"
VALIDITY_SVG = "validity.svg"
AGREEMENT_CSV = "agreement.csv"
AGREEMENT_MD = "agreement.md"
EVALUATION_MD = "evaluation.md"


# --- Logging ---
import logging
import colorlog # type: ignore

colorlog.escape_codes.escape_codes.update({
   'lavender': '\033[38;5;183m',
   'peach': '\033[38;5;216m',
   'cream': '\033[38;5;230m',
})

logger_settings = {
    'data':
        {'color': 'green', "indent": 6},
    'service':
        {'color': 'cyan', "indent": 6},
    'generator':
        {'color': 'lavender', "indent": 4},
    'report':
        {'color': 'peach', "indent": 2},
    'main':
        {'color': 'cream', 'indent': 0},
    'default':
        {'color': 'cream', "indent": 0}
}

LOG_LEVELS = {
    "error": logging.ERROR,
    "warn": logging.WARNING,
    "warning": logging.WARNING,
    "info": logging.INFO,
    "debug": logging.DEBUG,
}

def get_log_level() -> int:
    """Resolve PARCELFUSE_LOG to a logging level, defaulting to INFO."""
    raw = os.getenv("PARCELFUSE_LOG", "info").strip().lower()
    return LOG_LEVELS.get(raw, logging.INFO)

class CustomFormatter(colorlog.ColoredFormatter):
    def format(self, record):
        settings = logger_settings['default']
        for postfix, config in logger_settings.items():
            if postfix != 'default' and record.name.endswith(postfix):
                settings = config
                break
        self.log_colors = {record.levelname: settings['color']}
        return super().format(record)

def setup_logger(name: str, indent: int = 0) -> logging.Logger:
    logger = logging.getLogger(name)
    logger.setLevel(get_log_level())
    logger.propagate = False
    if logger.handlers:
        return logger

    handler = colorlog.StreamHandler()
    formatter = CustomFormatter(
        (" " * indent) + "%(log_color)s%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        reset=True,
        log_colors={}  # Empty, will be set in format()
    )
    handler.setFormatter(formatter)
    logger.addHandler(handler)

    if os.getenv("PARCELFUSE_LOG", "info").strip().lower() not in LOG_LEVELS:
        logger.warning(f"Unknown PARCELFUSE_LOG value {os.getenv('PARCELFUSE_LOG')!r}, using info")
    return logger


# --- Run configuration ---
logger = setup_logger("config_data", indent=6)


class ConfigError(ValueError):
    """Bad or missing run configuration. Maps to CLI exit code 1."""


class SourceConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    name: str = Field(min_length=1)
    path: Path
    format: str

    @field_validator("format")
    @classmethod
    def _known_format(cls, value: str) -> str:
        if value not in SOURCE_FORMATS:
            raise ValueError(f"unknown format {value!r}, expected one of {', '.join(SOURCE_FORMATS)}")
        return value


class RunConfig(BaseModel):
    """
    Everything one pipeline run needs: inputs, shipped or custom tables,
    the assignment radius, the projection and where outputs go.
    """
    model_config = ConfigDict(frozen=True)

    footprints_path: Path
    sources: list[SourceConfig] = Field(default_factory=list)
    taxonomy_path: Path = TAXONOMY_PATH
    crosswalk_paths: list[Path] = Field(default_factory=lambda: list(CROSSWALK_PATHS))
    authoritative_crosswalk_path: Path = AUTHORITATIVE_CROSSWALK_PATH
    radius: float = Field(default=DEFAULT_RADIUS, ge=0)
    projection_mode: Literal["already_planar", "equirectangular"] = "already_planar"
    origin_lat: float = Field(default=0.0, ge=-90, le=90)
    origin_lon: float = Field(default=0.0, ge=-180, le=180)
    output_dir: Path = Path(DEFAULT_OUTPUT_DIR)
    id_property: str = DEFAULT_ID_PROPERTY
    class_property: str = DEFAULT_CLASS_PROPERTY

    @field_validator("footprints_path", "taxonomy_path", "authoritative_crosswalk_path")
    @classmethod
    def _non_empty_path(cls, value: Path) -> Path:
        if str(value).strip() in ("", "."):
            raise ValueError("path must not be empty")
        return value

    def source(self, name: str) -> SourceConfig:
        for source in self.sources:
            if source.name == name:
                return source
        raise ConfigError(f"Unknown source {name!r}; configured sources: {', '.join(self.source_names) or 'none'}")

    @property
    def source_names(self) -> list[str]:
        return [source.name for source in self.sources]

    def select_sources(self, names: list[str] | None) -> list[SourceConfig]:
        """Configured sources filtered (and ordered) by ``names``; all of them when names is empty."""
        if not names:
            return list(self.sources)
        return [self.source(name) for name in names]


def read_ini(path: Path) -> configparser.ConfigParser:
    """Read an INI file, turning every read/syntax problem into ConfigError."""
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        with open(path, "r", encoding="utf-8") as handle:
            parser.read_file(handle)
    except OSError as e:
        raise ConfigError(f"Cannot read config file {path}: {e}") from e
    except configparser.Error as e:
        raise ConfigError(f"Malformed config file {path}: {e}") from e
    return parser


def _resolve(base: Path, raw: str) -> Path:
    path = Path(raw.strip())
    return path if path.is_absolute() else base / path


def load_run_config(path: Path | str) -> RunConfig:
    """
    Parse an INI run configuration into a validated RunConfig.

    Relative paths are resolved against the directory holding the config file.
    Sections named ``source:<name>`` declare one input source each.

    Raises:
        ConfigError: unreadable file, missing ``[run]`` / ``footprints``,
            or any field failing validation.
    """
    path = Path(path)
    parser = read_ini(path)
    base = path.parent

    if not parser.has_section("run"):
        raise ConfigError(f"{path}: missing [run] section")
    run = parser["run"]
    if not run.get("footprints", "").strip():
        raise ConfigError(f"{path}: [run] footprints is required")

    values: dict = {"footprints_path": _resolve(base, run["footprints"])}
    if run.get("taxonomy"):
        values["taxonomy_path"] = _resolve(base, run["taxonomy"])
    if run.get("crosswalks"):
        values["crosswalk_paths"] = [_resolve(base, p) for p in run["crosswalks"].split(",") if p.strip()]
    if run.get("authoritative_crosswalk"):
        values["authoritative_crosswalk_path"] = _resolve(base, run["authoritative_crosswalk"])
    if run.get("output_dir"):
        values["output_dir"] = _resolve(base, run["output_dir"])
    for key in ("radius", "id_property", "class_property"):
        if run.get(key):
            values[key] = run[key].strip()

    if parser.has_section("projection"):
        projection = parser["projection"]
        values["projection_mode"] = projection.get("mode", "already_planar").strip()
        for key in ("origin_lat", "origin_lon"):
            if projection.get(key):
                values[key] = projection[key].strip()

    sources = []
    for section in parser.sections():
        if not section.startswith("source:"):
            continue
        name = section.split(":", 1)[1].strip()
        entry = parser[section]
        if not entry.get("path", "").strip():
            raise ConfigError(f"{path}: [{section}] path is required")
        sources.append({
            "name": name,
            "path": _resolve(base, entry["path"]),
            "format": entry.get("format", "poi_csv").strip(),
        })
    values["sources"] = sources

    try:
        config = RunConfig(**values)
    except ValidationError as e:
        raise ConfigError(f"{path}: invalid configuration: {e}") from e

    names = config.source_names
    if len(set(names)) != len(names):
        raise ConfigError(f"{path}: duplicate source sections")

    logger.info(f"Loaded run config {path} with {len(config.sources)} source(s)")
    return config
