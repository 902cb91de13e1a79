"""Skeleton motion prediction with attention motion context and a gated highway decoder."""

from ._skelcast import (  # noqa: F401
    DataError,
    Model,
    ModelDims,
    MotionSequence,
    NormalizationStats,
    NumericError,
    ShapeError,
    TrainingConfig,
    WindowSample,
    __version__,
    angle_distance,
    downsample,
    euler_to_rotmat,
    evaluate,
    evaluate_zero_velocity,
    expmap_to_rotmat,
    fit_normalizer,
    gram_loss,
    gram_matrix,
    init_model,
    label_vocabulary,
    load_model,
    load_sequences,
    lr_at,
    make_windows,
    mean_angle_error,
    mse_loss,
    rotmat_to_euler,
    save_sequence,
    train,
    zero_velocity_predict,
)
