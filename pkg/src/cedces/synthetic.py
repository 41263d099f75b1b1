"""Generators for DAX files shaped like the Epigenomics and LIGO Inspiral workflows.

The real generator output is not shipped; these reproduce the job structure
with jittered runtimes and file sizes so the loader and the benchmark
harness have realistic inputs offline.
"""

from __future__ import annotations

import xml.etree.ElementTree as ET

import numpy as np

DAX_NS = "http://pegasus.isi.edu/schema/DAX"

# mean runtime (s) and output size (bytes) per job type
EPIGENOMICS_PROFILE = {
    "fastqSplit": (35.0, 240_000_000),
    "filterContams": (2.5, 12_000_000),
    "sol2sanger": (0.5, 10_000_000),
    "fast2bfq": (1.5, 2_500_000),
    "map": (200.0, 1_000_000),
    "mapMerge": (11.0, 40_000_000),
    "maqIndex": (43.0, 200_000_000),
    "pileup": (55.0, 80_000_000),
}

LIGO_PROFILE = {
    "TmpltBank": (18.0, 900_000),
    "Inspiral": (460.0, 300_000),
    "Thinca": (5.0, 40_000),
    "TrigBank": (5.0, 10_000),
}


class _DaxBuilder:
    def __init__(self, name: str, rng: np.random.Generator, profile: dict):
        self.root = ET.Element("adag", {"xmlns": DAX_NS, "version": "2.1", "name": name})
        self.rng = rng
        self.profile = profile
        self.jobs: list[ET.Element] = []
        self.outputs: dict[str, str] = {}
        self.deps: dict[str, list[str]] = {}
        self._sizes: dict[str, int] = {}

    def job(self, kind: str, inputs: list[str]) -> str:
        jid = f"ID{len(self.jobs):05d}"
        mean_rt, mean_size = self.profile[kind]
        rt = mean_rt * float(self.rng.uniform(0.8, 1.2))
        el = ET.Element("job", {"id": jid, "namespace": "synthetic", "name": kind, "version": "1.0", "runtime": f"{rt:.2f}"})
        for src in inputs:
            f = self.outputs[src]
            size = self._sizes[f]
            ET.SubElement(el, "uses", {"file": f, "link": "input", "size": str(size)})
            self.deps.setdefault(jid, []).append(src)
        out = f"{kind}_{jid}.out"
        size = int(mean_size * float(self.rng.uniform(0.8, 1.2)))
        self._sizes[out] = size
        ET.SubElement(el, "uses", {"file": out, "link": "output", "size": str(size)})
        self.outputs[jid] = out
        self.jobs.append(el)
        return jid

    def tostring(self) -> str:
        for el in self.jobs:
            self.root.append(el)
        for child, parents in self.deps.items():
            c = ET.SubElement(self.root, "child", {"ref": child})
            for p in parents:
                ET.SubElement(c, "parent", {"ref": p})
        ET.indent(self.root)
        return ET.tostring(self.root, encoding="unicode", xml_declaration=True) + "\n"


def epigenomics_dax(lanes: int, rng: np.random.Generator) -> str:
    """Epigenomics-shaped DAX with ``4 * lanes + 4`` jobs."""
    b = _DaxBuilder("epigenomics", rng, EPIGENOMICS_PROFILE)
    split = b.job("fastqSplit", [])
    ends = []
    for _ in range(lanes):
        j = b.job("filterContams", [split])
        j = b.job("sol2sanger", [j])
        j = b.job("fast2bfq", [j])
        ends.append(b.job("map", [j]))
    merge = b.job("mapMerge", ends)
    index = b.job("maqIndex", [merge])
    b.job("pileup", [index])
    return b.tostring()


def ligo_dax(blocks: int, width: int, rng: np.random.Generator) -> str:
    """LIGO-Inspiral-shaped DAX with ``blocks * (4 * width + 2)`` jobs."""
    b = _DaxBuilder("ligo", rng, LIGO_PROFILE)
    for _ in range(blocks):
        first = [b.job("Inspiral", [b.job("TmpltBank", [])]) for _ in range(width)]
        thinca = b.job("Thinca", first)
        second = [b.job("Inspiral", [b.job("TrigBank", [thinca])]) for _ in range(width)]
        b.job("Thinca", second)
    return b.tostring()
