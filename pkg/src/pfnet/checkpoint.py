"""Plain-text checkpoints.

Layout::

    pfnet-checkpoint 1
    config kind=pfnet n=8 window=32 ...
    scale 1.25 0.5 ...
    params 14
    ltpm.cnn.conv0.weight 3 32 8 3
    <row-major values, 17 significant digits, space separated>
    ...

Each parameter header line is ``name ndims d1 .. dk``; a 0-d parameter has
``ndims = 0`` and one value.
"""

import numpy as np

from .errors import ConfigError

MAGIC = "pfnet-checkpoint 1"


def _fmt(x):
    return format(float(x), ".17g")


def _parse_value(tok):
    for cast in (int, float):
        try:
            return cast(tok)
        except ValueError:
            pass
    if tok in ("True", "False"):
        return tok == "True"
    return None if tok == "None" else tok


def save_checkpoint(path, config, scale, params):
    """Write ``config`` (flat dict of scalars/strings), ``scale`` and ``params`` (name -> ndarray)."""
    for k, v in config.items():
        if " " in str(v) or "=" in str(k):
            raise ConfigError(f"config entry {k}={v!r} cannot be written to a checkpoint")
    lines = [MAGIC]
    lines.append("config " + " ".join(f"{k}={v!r}" if isinstance(v, float) else f"{k}={v}"
                                       for k, v in config.items()))
    lines.append("scale " + " ".join(_fmt(s) for s in np.asarray(scale).ravel()))
    lines.append(f"params {len(params)}")
    for name, value in params.items():
        value = np.asarray(value, dtype=np.float64)
        lines.append(" ".join([name, str(value.ndim)] + [str(d) for d in value.shape]))
        lines.append(" ".join(_fmt(v) for v in value.ravel()))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_checkpoint(path):
    """Return ``(config, scale, params)`` exactly as saved."""
    with open(path) as fh:
        lines = fh.read().split("\n")
    if not lines or lines[0] != MAGIC:
        raise ConfigError(f"{path}: not a checkpoint file")
    config = {}
    for item in lines[1].split()[1:]:
        key, _, value = item.partition("=")
        config[key] = _parse_value(value)
    scale = np.array([float(t) for t in lines[2].split()[1:]])
    count = int(lines[3].split()[1])
    params = {}
    pos = 4
    for _ in range(count):
        head = lines[pos].split()
        name, ndim = head[0], int(head[1])
        shape = tuple(int(d) for d in head[2:2 + ndim])
        values = np.array([float(t) for t in lines[pos + 1].split()], dtype=np.float64)
        params[name] = values.reshape(shape)
        pos += 2
    return config, scale, params
