from scipy.stats import qmc
import warnings
import numpy as np

from fast_replan.errors import DimensionTooLarge

# scipy 内置方向数支持的最大维数
MAX_SOBOL_DIM = 21201


def qmc_samples(dim: int, count: int) -> np.ndarray:
    """
    非扰动 Sobol 序列的前 count 个点，映射到 [-1, 1]^dim

    相同 (dim, count) 总是返回相同的点；count 不是 2 的幂时也按序截取。
    """
    if dim < 1 or count < 1:
        raise ValueError(f"qmc_samples: dim and count must be >= 1, got ({dim}, {count})")
    if dim > MAX_SOBOL_DIM:
        raise DimensionTooLarge(f"Sobol direction numbers support at most {MAX_SOBOL_DIM} dims, got {dim}")
    engine = qmc.Sobol(d=dim, scramble=False)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        points = engine.random(count)
    return 2.0 * points - 1.0
