"""C-GAME origin-destination estimation from link traffic counts."""

from ._cgame import (  # noqa: F401
    ChecksumError,
    ConfigError,
    DataError,
    Dataset,
    Error,
    FormatError,
    IndexError,
    Model,
    NumericError,
    ShapeError,
    UndefinedMetricError,
    VersionError,
    accuracy,
    default_config_json,
    enumerate_routes,
    generate_dataset,
    grid_size,
    hotspot_recall,
    load_dataset,
    load_model,
    mae,
    r2,
    rmse,
    train,
    var_score,
)

__version__ = "0.1.0"
