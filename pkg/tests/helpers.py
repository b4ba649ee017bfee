from __future__ import annotations

from turnid.splits import CorpusManifest, Interview


def make_manifest(counts=(("C", 22), ("preHD", 18), ("HD", 54)), duration=600.0):
    items = []
    for group, n in counts:
        for i in range(n):
            fid = f"{group}{i:03d}"
            items.append(
                Interview(
                    fid,
                    duration,
                    "ref.rttm",
                    (f"scores/{fid}.csv",),
                    group,
                    {f"{fid}_np": "Neuropsychologist", f"{fid}_it": "Interviewee"},
                )
            )
    return CorpusManifest(items)
