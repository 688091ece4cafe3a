"""
灵敏度网格的二进制文件格式（小端序）

    "RJGD" | u32 版本 | u32 维数
    | 每维：u32 参数下标, u32 节点数, f64 坐标...
    | u32 N | f64 标称控制 (N+1)
    | u8 缺失标记（每节点一个，行优先）
    | u32 元数据长度 | UTF-8 JSON 元数据
    | f64 灵敏度矩阵（节点行优先，每个矩阵 (N+1)×dims 行优先）
    | 8 字节 BLAKE2b 校验和（覆盖之前所有字节）
"""

from pathlib import Path
from typing import Union
import hashlib
import json
import logging
import os
import struct

import numpy as np

from fast_replan.errors import ChecksumMismatch, FormatVersionMismatch, GridIoError, InvalidGrid
from fast_replan.ocp import Controller
from fast_replan.ode import TimeGrid
from .grid import JacobianGrid

logger = logging.getLogger(__name__)

MAGIC = b"RJGD"
FORMAT_VERSION = 1
CHECKSUM_SIZE = 8


def _checksum(data: bytes) -> bytes:
    return hashlib.blake2b(data, digest_size=CHECKSUM_SIZE).digest()


def encode_grid(grid: JacobianGrid) -> bytes:
    if not grid.dims:
        raise InvalidGrid("cannot save a grid without dimensions")
    parts = [MAGIC, struct.pack("<II", FORMAT_VERSION, len(grid.dims))]
    for index, coords in zip(grid.dims, grid.node_coords):
        parts.append(struct.pack("<II", index, coords.size))
        parts.append(coords.astype("<f8").tobytes())
    parts.append(struct.pack("<I", grid.n_coeffs - 1))
    parts.append(grid.nominal_u.coeffs.astype("<f8").tobytes())
    parts.append(grid.missing.astype(np.uint8).tobytes(order="C"))
    # 控制器时间网格放在元数据里，加载后可还原 Controller
    meta = dict(grid.meta)
    meta["controller_grid"] = grid.nominal_u.grid.model_dump()
    meta_bytes = json.dumps(meta, sort_keys=True, allow_nan=True).encode("utf-8")
    parts.append(struct.pack("<I", len(meta_bytes)))
    parts.append(meta_bytes)
    parts.append(np.ascontiguousarray(grid.payload, dtype="<f8").tobytes(order="C"))
    body = b"".join(parts)
    return body + _checksum(body)


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.offset = 0

    def take(self, size: int) -> bytes:
        if self.offset + size > len(self.data):
            raise InvalidGrid("grid file ends before its declared contents")
        chunk = self.data[self.offset:self.offset + size]
        self.offset += size
        return chunk

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]

    def f64(self, count: int) -> np.ndarray:
        return np.frombuffer(self.take(8 * count), dtype="<f8").astype(float)


def decode_grid(data: bytes) -> JacobianGrid:
    if len(data) < len(MAGIC) + 4 or data[:len(MAGIC)] != MAGIC:
        if MAGIC.startswith(data[:len(MAGIC)]):
            raise ChecksumMismatch("grid file is truncated")
        raise InvalidGrid("not a grid file (bad magic bytes)")
    version = struct.unpack("<I", data[4:8])[0]
    if version != FORMAT_VERSION:
        raise FormatVersionMismatch(f"grid file version {version}, expected {FORMAT_VERSION}")
    if len(data) < 8 + CHECKSUM_SIZE:
        raise ChecksumMismatch("grid file is truncated")
    body, digest = data[:-CHECKSUM_SIZE], data[-CHECKSUM_SIZE:]
    if _checksum(body) != digest:
        raise ChecksumMismatch("grid file checksum does not match (corrupted or truncated)")

    reader = _Reader(body)
    reader.take(8)
    n_dims = reader.u32()
    dims, coords = [], []
    for _ in range(n_dims):
        dims.append(reader.u32())
        coords.append(reader.f64(reader.u32()))
    n_coeffs = reader.u32() + 1
    nominal = reader.f64(n_coeffs)
    shape = tuple(c.size for c in coords)
    n_nodes = int(np.prod(shape))
    missing = np.frombuffer(reader.take(n_nodes), dtype=np.uint8).astype(bool).reshape(shape)
    meta = json.loads(reader.take(reader.u32()).decode("utf-8"))
    payload = reader.f64(n_nodes * n_coeffs * n_dims).reshape(shape + (n_coeffs, n_dims))
    if reader.offset != len(body):
        raise InvalidGrid("grid file has trailing bytes")

    controller_grid = TimeGrid.model_validate(meta.pop("controller_grid"))
    return JacobianGrid(
        dims=dims,
        node_coords=coords,
        payload=payload,
        missing=missing,
        nominal_u=Controller(grid=controller_grid, coeffs=nominal),
        meta=meta,
    )


def save_grid(grid: JacobianGrid, path: Union[str, Path]) -> Path:
    """写入网格文件（先写临时文件再原子替换）"""
    path = Path(path)
    data = encode_grid(grid)
    tmp = path.with_name(path.name + ".tmp")
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp.write_bytes(data)
        os.replace(tmp, path)
    except OSError as e:
        raise GridIoError(f"cannot write grid file {path}: {e}") from e
    logger.info("灵敏度网格已保存: %s (%d 字节, %d 节点)", path, len(data), grid.n_nodes)
    return path


def load_grid(path: Union[str, Path]) -> JacobianGrid:
    """读取并校验网格文件；校验失败时不返回任何部分结果"""
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as e:
        raise GridIoError(f"cannot read grid file {path}: {e}") from e
    return decode_grid(data)
