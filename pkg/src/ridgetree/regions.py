"""Regional weight binning and coverage analysis against a label volume.

A label volume partitions the grid into named regions (label 0 is
background). Weighted skeleton nodes or whole density fields are binned by
region; regions are ranked by total weight and marked covered when their
weight is positive. The coverage rate against a reference weighting is the
reference weight falling in covered regions divided by the total reference
weight, computed per hemisphere and overall. Background weight is tracked
but excluded from percentages, ranks and coverage.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import DensityField, GridGeometry
from .tree import SkeletonTree

__all__ = ["RegionLabelVolume", "RegionRow", "RegionReport", "region_report"]


@dataclass
class RegionLabelVolume:
    """Integer region label per voxel with a name/hemisphere table."""

    geometry: GridGeometry
    labels: np.ndarray  # (V,) int32, linear order, 0 = background
    names: dict[int, str]
    hemispheres: dict[int, str] | None = None

    def __post_init__(self) -> None:
        self.labels = np.ascontiguousarray(self.labels, dtype=np.int32).ravel()
        if self.labels.size != self.geometry.num_voxels:
            raise ValueError("label count does not match the grid")
        if self.labels.min(initial=0) < 0:
            raise ValueError("labels must be non-negative")

    def name_of(self, label: int) -> str:
        return self.names.get(label, f"region_{label}")

    def hemisphere_of(self, label: int) -> str | None:
        if self.hemispheres is None:
            return None
        return self.hemispheres.get(label)

    # -- simple text+binary container ------------------------------------

    def write(self, path) -> None:
        nx, ny, nz = self.geometry.dims
        with open(path, "wb") as fh:
            fh.write(b"REGION_LABELS 1\n")
            fh.write(f"DIMENSIONS {nx} {ny} {nz}\n".encode())
            fh.write("SPACING {:g} {:g} {:g}\n".format(*self.geometry.spacing).encode())
            fh.write("ORIGIN {:g} {:g} {:g}\n".format(*self.geometry.origin).encode())
            entries = sorted(self.names)
            fh.write(f"LABELS {len(entries)}\n".encode())
            for lab in entries:
                hemi = self.hemisphere_of(lab) or "-"
                fh.write(f"{lab} {hemi} {self.names[lab]}\n".encode())
            fh.write(b"DATA int32\n")
            fh.write(self.labels.astype("<i4").tobytes())

    @classmethod
    def read(cls, path) -> "RegionLabelVolume":
        with open(path, "rb") as fh:
            magic = fh.readline().split()
            if not magic or magic[0] != b"REGION_LABELS":
                raise ValueError(f"{path}: not a region label volume")
            dims = spacing = origin = None
            names: dict[int, str] = {}
            hemis: dict[int, str] = {}
            while True:
                line = fh.readline()
                if not line:
                    raise ValueError(f"{path}: truncated header")
                toks = line.decode().split()
                if toks[0] == "DIMENSIONS":
                    dims = tuple(int(t) for t in toks[1:4])
                elif toks[0] == "SPACING":
                    spacing = tuple(float(t) for t in toks[1:4])
                elif toks[0] == "ORIGIN":
                    origin = tuple(float(t) for t in toks[1:4])
                elif toks[0] == "LABELS":
                    for _ in range(int(toks[1])):
                        lab, hemi, *name = fh.readline().decode().split()
                        names[int(lab)] = " ".join(name)
                        if hemi != "-":
                            hemis[int(lab)] = hemi
                elif toks[0] == "DATA":
                    if toks[1] != "int32":
                        raise ValueError(f"{path}: unsupported data type {toks[1]}")
                    break
                else:
                    raise ValueError(f"{path}: unexpected header line {toks[0]!r}")
            if dims is None:
                raise ValueError(f"{path}: missing DIMENSIONS")
            n = dims[0] * dims[1] * dims[2]
            raw = fh.read(4 * n)
            if len(raw) < 4 * n:
                raise ValueError(f"{path}: label payload truncated")
            labels = np.frombuffer(raw, dtype="<i4")
        geom = GridGeometry(dims, spacing or (1, 1, 1), origin or (0, 0, 0))
        return cls(geom, labels.copy(), names, hemis or None)


@dataclass
class RegionRow:
    label: int
    name: str
    hemisphere: str | None
    weight: float
    percent: float
    rank: int
    covered: bool


@dataclass
class RegionReport:
    rows: list[RegionRow]            # non-background regions, ranked
    total_weight: float              # all regions, background excluded
    background_weight: float
    coverage: dict[str, float]       # "all" plus one entry per hemisphere

    def format_lines(self) -> list[str]:
        lines = ["rank label hemisphere weight percent covered name"]
        for r in self.rows:
            lines.append(
                f"{r.rank:4d} {r.label:5d} {r.hemisphere or '-':>10} "
                f"{r.weight:14.6g} {r.percent:7.3f} {str(r.covered):>7} {r.name}"
            )
        lines.append(f"background weight: {self.background_weight:.6g}")
        for key in sorted(self.coverage):
            lines.append(f"coverage[{key}]: {self.coverage[key]:.6f}")
        return lines

    def write(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("\n".join(self.format_lines()) + "\n")

    def write_tsv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("rank\tlabel\themisphere\tweight\tpercent\tcovered\tname\n")
            for r in self.rows:
                fh.write(
                    f"{r.rank}\t{r.label}\t{r.hemisphere or '-'}\t{r.weight:.9g}\t"
                    f"{r.percent:.6f}\t{int(r.covered)}\t{r.name}\n"
                )


def _bin_weights(source, labels: RegionLabelVolume) -> np.ndarray:
    """Total weight per label (index = label value)."""
    geom = labels.geometry
    n_lab = int(labels.labels.max()) + 1
    if isinstance(source, DensityField):
        if source.geometry.dims != geom.dims:
            raise ValueError(
                f"density grid {source.geometry.dims} does not match "
                f"label grid {geom.dims}"
            )
        return np.bincount(
            labels.labels, weights=source.values.astype(np.float64), minlength=n_lab
        )
    if isinstance(source, SkeletonTree):
        trees = [source]
    else:
        trees = list(source)
    sums = np.zeros(n_lab, dtype=np.float64)
    for tree in trees:
        if tree.weight is None:
            raise ValueError("tree has no summary weights; run assign_weights")
        ijk = np.rint(
            (tree.positions - np.asarray(geom.origin)) / np.asarray(geom.spacing)
        ).astype(np.int64)
        inside = np.all((ijk >= 0) & (ijk < np.asarray(geom.dims)), axis=1)
        lab = np.zeros(len(tree), dtype=np.int64)  # outside grid -> background
        lin = geom.linear_index(ijk[inside, 0], ijk[inside, 1], ijk[inside, 2])
        lab[inside] = labels.labels[lin]
        sums += np.bincount(lab, weights=tree.weight, minlength=n_lab)
    return sums


def region_report(source, labels: RegionLabelVolume, reference=None) -> RegionReport:
    """Bin weights by region; rank, flag coverage, and rate coverage.

    ``source`` is a weighted tree (or list of trees) or a DensityField.
    ``reference`` (same kinds) supplies the weighting that coverage rates
    are measured against; by default the source itself is used, which makes
    the overall coverage 1.0 whenever any region is touched.
    """
    weights = _bin_weights(source, labels)
    ref_weights = weights if reference is None else _bin_weights(reference, labels)
    n_lab = max(len(weights), len(ref_weights))
    weights = np.pad(weights, (0, n_lab - len(weights)))
    ref_weights = np.pad(ref_weights, (0, n_lab - len(ref_weights)))

    region_labels = sorted(set(range(1, n_lab)) | {l for l in labels.names if l != 0})
    total = float(sum(weights[l] for l in region_labels if l < len(weights)))
    order = sorted(region_labels, key=lambda l: (-weights[l], l))
    rows = []
    for rank, lab in enumerate(order, start=1):
        w = float(weights[lab])
        rows.append(
            RegionRow(
                label=lab,
                name=labels.name_of(lab),
                hemisphere=labels.hemisphere_of(lab),
                weight=w,
                percent=0.0 if total == 0 else 100.0 * w / total,
                rank=rank,
                covered=w > 0,
            )
        )

    coverage: dict[str, float] = {}
    groups: dict[str, list[int]] = {"all": region_labels}
    for lab in region_labels:
        hemi = labels.hemisphere_of(lab)
        if hemi is not None:
            groups.setdefault(hemi, []).append(lab)
    for key, labs in groups.items():
        denom = float(sum(ref_weights[l] for l in labs))
        num = float(sum(ref_weights[l] for l in labs if weights[l] > 0))
        coverage[key] = 0.0 if denom == 0 else num / denom
    return RegionReport(
        rows=rows,
        total_weight=total,
        background_weight=float(weights[0]),
        coverage=coverage,
    )
