"""End-to-end dataset generation: sampling, warping solves, dataset rows."""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor

import numpy as np

from beampot.core import MaterialParams, SectionGeometry
from beampot.data import Dataset, DatasetRow
from beampot.mesh import mesh_section
from beampot.sampling import SamplingConfig, build_paths
from beampot.warping import WarpingConfig, trace_load_path


def _trace_one(args):
    path_id, states, geom, mat, elements = args
    if not states:
        return path_id, [], False
    mesh = mesh_section(geom, elements)
    trace = trace_load_path(states, mesh, mat, WarpingConfig())
    rows = [(row.state.as_vector(), row.q.as_vector(), row.psi) for row in trace]
    return path_id, rows, trace.truncated


def generate_dataset(
    geom: SectionGeometry,
    mat: MaterialParams,
    cfg: SamplingConfig,
    elements: int = 800,
    jobs: int = 1,
    path_id_offset: int = 0,
) -> tuple[Dataset, int]:
    """Sampled concentric paths traced through the warping solver.

    Paths are independent; with ``jobs`` > 1 they are distributed over
    processes, output order stays deterministic. Returns the dataset and
    the number of truncated paths.
    """
    paths = build_paths(cfg, geom=geom)
    tasks = [
        (pid, [s.as_vector() for s in states], geom, mat, elements)
        for pid, states in enumerate(paths)
    ]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_trace_one, tasks))
    else:
        results = [_trace_one(t) for t in tasks]

    ds = Dataset()
    truncated = 0
    ratio = geom.ratio
    radius = geom.outer_radius
    for path_id, rows, was_truncated in sorted(results, key=lambda r: r[0]):
        truncated += int(was_truncated)
        for step_id, (p, q, psi) in enumerate(rows):
            ds.rows.append(
                DatasetRow(
                    p=np.asarray(p),
                    q=np.asarray(q),
                    psi=psi,
                    radius=radius,
                    ratio=ratio,
                    path_id=path_id_offset + path_id,
                    step_id=step_id,
                )
            )
    return ds, truncated
