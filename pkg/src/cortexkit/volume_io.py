"""Volume file I/O: NIfTI-1 plus a JSON-sidecar raw format.

NIfTI support is deliberately narrow: single-file little-endian ``.nii``
(optionally gzipped), 348-byte header, datatypes uint8/int16/float32,
``dim[0]`` of 3 (scalar/label volumes) or 4 with ``dim[4] == 3`` (vector
fields, component axis last). ``pixdim`` supplies the spacing. qform/sform
are parsed, but only affines that are a positive diagonal plus translation
are honored; anything else is rejected as unsupported.

The raw sidecar format is a JSON header naming dims/spacing/origin/dtype and
a flat binary file, x-fastest, little-endian. Vector data uses dtype
``float32x3`` with the three components interleaved per voxel.
"""

from __future__ import annotations

import gzip
import json
import os

import numpy as np

from .errors import DataFormatError, UsageError, ValidationError
from .grid import LabelVolume, MAX_LABEL, ScalarField, VoxelGrid

HEADER_SIZE = 348
VOX_OFFSET = 352

_DTYPES = {2: np.uint8, 4: np.int16, 16: np.float32}
_DTYPE_CODES = {np.dtype(np.uint8): 2, np.dtype(np.int16): 4, np.dtype(np.float32): 16}

_HDR = np.dtype(
    [
        ("sizeof_hdr", "<i4"),
        ("data_type", "S10"),
        ("db_name", "S18"),
        ("extents", "<i4"),
        ("session_error", "<i2"),
        ("regular", "S1"),
        ("dim_info", "u1"),
        ("dim", "<i2", (8,)),
        ("intent_p1", "<f4"),
        ("intent_p2", "<f4"),
        ("intent_p3", "<f4"),
        ("intent_code", "<i2"),
        ("datatype", "<i2"),
        ("bitpix", "<i2"),
        ("slice_start", "<i2"),
        ("pixdim", "<f4", (8,)),
        ("vox_offset", "<f4"),
        ("scl_slope", "<f4"),
        ("scl_inter", "<f4"),
        ("slice_end", "<i2"),
        ("slice_code", "u1"),
        ("xyzt_units", "u1"),
        ("cal_max", "<f4"),
        ("cal_min", "<f4"),
        ("slice_duration", "<f4"),
        ("toffset", "<f4"),
        ("glmax", "<i4"),
        ("glmin", "<i4"),
        ("descrip", "S80"),
        ("aux_file", "S24"),
        ("qform_code", "<i2"),
        ("sform_code", "<i2"),
        ("quatern_b", "<f4"),
        ("quatern_c", "<f4"),
        ("quatern_d", "<f4"),
        ("qoffset_x", "<f4"),
        ("qoffset_y", "<f4"),
        ("qoffset_z", "<f4"),
        ("srow_x", "<f4", (4,)),
        ("srow_y", "<f4", (4,)),
        ("srow_z", "<f4", (4,)),
        ("intent_name", "S16"),
        ("magic", "S4"),
    ]
)
assert _HDR.itemsize == HEADER_SIZE


def _read_bytes(path: str) -> bytes:
    with open(path, "rb") as f:
        head = f.read(2)
        f.seek(0)
        if head == b"\x1f\x8b":
            with gzip.open(f) as gz:
                return gz.read()
        return f.read()


def _parse_origin(hdr) -> tuple[float, float, float]:
    """Translation of the sform/qform affine; rejects rotated/flipped axes."""
    if hdr["sform_code"] > 0:
        rows = np.stack([hdr["srow_x"], hdr["srow_y"], hdr["srow_z"]]).astype(np.float64)
        lin = rows[:, :3]
        off_diag = lin - np.diag(np.diag(lin))
        if np.abs(off_diag).max() > 1e-5 or np.any(np.diag(lin) < 0):
            raise DataFormatError("unsupported sform: only positive-diagonal + translation affines are handled")
        return tuple(float(v) for v in rows[:, 3])
    if hdr["qform_code"] > 0:
        quat = (float(hdr["quatern_b"]), float(hdr["quatern_c"]), float(hdr["quatern_d"]))
        if max(abs(v) for v in quat) > 1e-5:
            raise DataFormatError("unsupported qform: rotations are not handled")
        if float(hdr["pixdim"][0]) < 0:
            raise DataFormatError("unsupported qform: negative qfac flips an axis")
        return (float(hdr["qoffset_x"]), float(hdr["qoffset_y"]), float(hdr["qoffset_z"]))
    return (0.0, 0.0, 0.0)


def read_nifti(path: str) -> VoxelGrid:
    """Read a supported NIfTI-1 file into a VoxelGrid (float data unscaled)."""
    raw = _read_bytes(path)
    if len(raw) < HEADER_SIZE:
        raise DataFormatError(f"{path}: file shorter than a NIfTI-1 header")
    hdr = np.frombuffer(raw[:HEADER_SIZE], dtype=_HDR)[0]
    if int(hdr["sizeof_hdr"]) != HEADER_SIZE:
        if int(hdr["sizeof_hdr"].byteswap()) == HEADER_SIZE:
            raise DataFormatError(f"{path}: big-endian NIfTI is not supported")
        raise DataFormatError(f"{path}: bad sizeof_hdr {int(hdr['sizeof_hdr'])}")
    magic = bytes(hdr["magic"]).rstrip(b"\x00")
    if magic not in (b"n+1", b"ni1"):
        raise DataFormatError(f"{path}: bad magic {magic!r}")
    if magic == b"ni1":
        raise DataFormatError(f"{path}: two-file NIfTI (.hdr/.img) is not supported")

    ndim = int(hdr["dim"][0])
    if ndim not in (3, 4):
        raise DataFormatError(f"{path}: dim[0] must be 3 or 4, got {ndim}")
    dims = tuple(int(v) for v in hdr["dim"][1:4])
    if min(dims) < 1:
        raise DataFormatError(f"{path}: non-positive dims {dims}")
    ncomp = 1
    if ndim == 4:
        ncomp = int(hdr["dim"][4])
        if ncomp != 3:
            raise DataFormatError(f"{path}: 4D volumes must have dim[4] == 3, got {ncomp}")

    code = int(hdr["datatype"])
    if code not in _DTYPES:
        raise DataFormatError(f"{path}: unsupported datatype code {code}")
    dtype = np.dtype(_DTYPES[code]).newbyteorder("<")

    spacing = tuple(float(v) for v in hdr["pixdim"][1:4])
    if any(s <= 0 for s in spacing):
        raise DataFormatError(f"{path}: non-positive pixdim {spacing}")
    origin = _parse_origin(hdr)

    offset = int(hdr["vox_offset"])
    count = dims[0] * dims[1] * dims[2] * ncomp
    body = raw[offset : offset + count * dtype.itemsize]
    if len(body) != count * dtype.itemsize:
        raise DataFormatError(f"{path}: truncated data section")
    flat = np.frombuffer(body, dtype=dtype)

    slope = float(hdr["scl_slope"])
    inter = float(hdr["scl_inter"])
    scaled = slope not in (0.0, 1.0) or inter != 0.0
    if ncomp == 1:
        data = flat.reshape(dims, order="F")
    else:
        # NIfTI stores whole component volumes one after another
        data = flat.reshape(dims + (ncomp,), order="F")
    if scaled:
        if not np.issubdtype(dtype.base, np.floating):
            raise DataFormatError(f"{path}: scl_slope/inter scaling on integer data is not supported")
        data = data.astype(np.float64) * slope + inter
    return VoxelGrid(np.ascontiguousarray(data), spacing, origin)


def write_nifti(path: str, grid: VoxelGrid, dtype=None) -> None:
    """Write a VoxelGrid as single-file little-endian NIfTI-1."""
    data = grid.data
    vector = data.ndim == 4
    if dtype is None:
        dtype = np.float32 if np.issubdtype(data.dtype, np.floating) or vector else data.dtype
    dtype = np.dtype(dtype)
    if dtype not in _DTYPE_CODES:
        raise UsageError(f"unsupported NIfTI dtype {dtype}")

    hdr = np.zeros(1, dtype=_HDR)[0]
    hdr["sizeof_hdr"] = HEADER_SIZE
    hdr["regular"] = b"r"
    dim = np.ones(8, dtype=np.int16)
    dim[0] = 4 if vector else 3
    dim[1:4] = grid.dims
    if vector:
        dim[4] = 3
    hdr["dim"] = dim
    hdr["datatype"] = _DTYPE_CODES[dtype]
    hdr["bitpix"] = dtype.itemsize * 8
    pixdim = np.zeros(8, dtype=np.float32)
    pixdim[0] = 1.0
    pixdim[1:4] = grid.spacing
    hdr["pixdim"] = pixdim
    hdr["vox_offset"] = VOX_OFFSET
    hdr["scl_slope"] = 1.0
    hdr["xyzt_units"] = 2  # mm
    hdr["sform_code"] = 1
    hdr["srow_x"] = (grid.spacing[0], 0, 0, grid.origin[0])
    hdr["srow_y"] = (0, grid.spacing[1], 0, grid.origin[1])
    hdr["srow_z"] = (0, 0, grid.spacing[2], grid.origin[2])
    hdr["magic"] = b"n+1"

    flat = np.asarray(data, dtype=dtype.newbyteorder("<")).ravel(order="F")
    payload = hdr.tobytes() + b"\x00" * (VOX_OFFSET - HEADER_SIZE) + flat.tobytes()
    if path.endswith(".gz"):
        # mtime and filename pinned so identical volumes give identical bytes
        with open(path, "wb") as f:
            with gzip.GzipFile(fileobj=f, mode="wb", mtime=0, filename="") as gz:
                gz.write(payload)
    else:
        with open(path, "wb") as f:
            f.write(payload)


_RAW_DTYPES = {"uint8": np.uint8, "int16": np.int16, "float32": np.float32, "float32x3": np.float32}


def read_raw_sidecar(path: str) -> VoxelGrid:
    """Read the JSON-header + flat-binary sidecar format."""
    try:
        with open(path) as f:
            meta = json.load(f)
    except json.JSONDecodeError as e:
        raise DataFormatError(f"{path}: malformed JSON header ({e})") from e
    missing = {"dims", "spacing", "origin", "dtype", "data"} - set(meta)
    if missing:
        raise DataFormatError(f"{path}: sidecar header missing keys {sorted(missing)}")
    if meta["dtype"] not in _RAW_DTYPES:
        raise DataFormatError(f"{path}: unsupported dtype {meta['dtype']!r}")
    dims = tuple(int(v) for v in meta["dims"])
    ncomp = 3 if meta["dtype"] == "float32x3" else 1
    dtype = np.dtype(_RAW_DTYPES[meta["dtype"]]).newbyteorder("<")
    data_path = os.path.join(os.path.dirname(path), meta["data"])
    with open(data_path, "rb") as f:
        body = f.read()
    count = dims[0] * dims[1] * dims[2] * ncomp
    if len(body) != count * dtype.itemsize:
        raise DataFormatError(
            f"{data_path}: expected {count * dtype.itemsize} bytes, found {len(body)}"
        )
    flat = np.frombuffer(body, dtype=dtype)
    if ncomp == 1:
        data = flat.reshape(dims, order="F")
    else:
        # components interleaved per voxel: fastest axis is the component
        data = flat.reshape((ncomp,) + dims, order="F")
        data = np.moveaxis(data, 0, -1)
    return VoxelGrid(np.ascontiguousarray(data), meta["spacing"], meta["origin"])


def write_raw_sidecar(path: str, grid: VoxelGrid, dtype=None) -> None:
    if not path.endswith(".json"):
        raise UsageError("sidecar header path must end in .json")
    data = grid.data
    vector = data.ndim == 4
    if dtype is None:
        dtype = np.float32 if np.issubdtype(data.dtype, np.floating) or vector else data.dtype
    dtype = np.dtype(dtype)
    name = "float32x3" if vector else dtype.name
    if name not in _RAW_DTYPES:
        raise UsageError(f"unsupported sidecar dtype {dtype}")
    data_name = os.path.basename(path)[:-5] + ".raw"
    meta = {
        "dims": list(grid.dims),
        "spacing": list(grid.spacing),
        "origin": list(grid.origin),
        "dtype": name,
        "data": data_name,
    }
    if vector:
        flat = np.moveaxis(data.astype(dtype.newbyteorder("<")), -1, 0).ravel(order="F")
    else:
        flat = np.asarray(data, dtype=dtype.newbyteorder("<")).ravel(order="F")
    with open(os.path.join(os.path.dirname(path), data_name), "wb") as f:
        f.write(flat.tobytes())
    with open(path, "w") as f:
        json.dump(meta, f, indent=1)
        f.write("\n")


def _read_any(path: str) -> VoxelGrid:
    if path.endswith(".json"):
        return read_raw_sidecar(path)
    return read_nifti(path)


def load_label_volume(path: str) -> LabelVolume:
    """Load a segmentation label map, validating the 0..8 label range."""
    if not os.path.exists(path):
        raise DataFormatError(f"{path}: no such file")
    grid = _read_any(path)
    data = grid.data
    if data.ndim != 3:
        raise ValidationError(f"{path}: label volumes must be 3D")
    if np.issubdtype(data.dtype, np.floating):
        rounded = np.rint(data)
        if not np.array_equal(rounded, data):
            raise ValidationError(f"{path}: non-integer values in label volume")
        data = rounded
    bad = (data < 0) | (data > MAX_LABEL)
    if bad.any():
        idx = tuple(int(v) for v in np.argwhere(bad)[0])
        raise ValidationError(
            f"{path}: label {int(data[idx])} at voxel {idx} outside the allowed range 0..{MAX_LABEL}"
        )
    return LabelVolume(grid.with_data(data.astype(np.uint8)))


def save_label_volume(path: str, labels: LabelVolume) -> None:
    if path.endswith(".json"):
        write_raw_sidecar(path, labels.grid, np.uint8)
    else:
        write_nifti(path, labels.grid, np.uint8)


def load_scalar_field(path: str) -> ScalarField:
    if not os.path.exists(path):
        raise DataFormatError(f"{path}: no such file")
    grid = _read_any(path)
    if grid.data.ndim != 3:
        raise ValidationError(f"{path}: expected a scalar volume")
    return ScalarField(grid.with_data(grid.data.astype(np.float64)))


def save_scalar_field(path: str, fld: ScalarField) -> None:
    if path.endswith(".json"):
        write_raw_sidecar(path, fld.grid, np.float32)
    else:
        write_nifti(path, fld.grid, np.float32)


def load_vector_grid(path: str) -> VoxelGrid:
    if not os.path.exists(path):
        raise DataFormatError(f"{path}: no such file")
    grid = _read_any(path)
    if grid.data.ndim != 4:
        raise ValidationError(f"{path}: expected a 3-component vector volume")
    return grid.with_data(grid.data.astype(np.float64))


def save_vector_grid(path: str, grid: VoxelGrid) -> None:
    if grid.data.ndim != 4:
        raise UsageError("vector output requires (nx, ny, nz, 3) data")
    if path.endswith(".json"):
        write_raw_sidecar(path, grid, np.float32)
    else:
        write_nifti(path, grid, np.float32)
