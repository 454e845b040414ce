#!/usr/bin/env python3
"""Materialize the LINQS Cora citation dataset as cora.content / cora.cites.

The raw Cora tables ship inside the `graphdatascience` wheel on PyPI as two
parquet files (nodes with subject id and 1433 binary word features, and the
unmodified cites rows). This script downloads the wheel with pip, reads the
tables and writes them back out in the original whitespace-separated layout:

    cora.content   <paper_id> <w_0> ... <w_1432> <class_label>
    cora.cites     <cited_paper_id> <citing_paper_id>

Usage: tools/fetch_cora.py [--out data/cora]
"""

import argparse
import glob
import io
import os
import subprocess
import sys
import tempfile
import zipfile

import pandas as pd

SUBJECTS = [
    "Neural_Networks",
    "Rule_Learning",
    "Reinforcement_Learning",
    "Probabilistic_Methods",
    "Theory",
    "Genetic_Algorithms",
    "Case_Based",
]

WHEEL_VERSION = "2.1"


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default=os.path.join(os.path.dirname(__file__), "..", "data", "cora"))
    ap.add_argument("--wheel", help="use an already downloaded graphdatascience wheel")
    args = ap.parse_args()

    with tempfile.TemporaryDirectory() as tmp:
        wheel = args.wheel
        if wheel is None:
            subprocess.check_call(
                [sys.executable, "-m", "pip", "download", "--no-deps", "--quiet",
                 f"graphdatascience=={WHEEL_VERSION}", "-d", tmp])
            wheel = glob.glob(os.path.join(tmp, "graphdatascience-*.whl"))[0]
        z = zipfile.ZipFile(wheel)
        nodes = pd.read_parquet(io.BytesIO(z.read("graphdatascience/resources/cora/cora_nodes.parquet.gzip")))
        rels = pd.read_parquet(io.BytesIO(z.read("graphdatascience/resources/cora/cora_rels.parquet.gzip")))

    os.makedirs(args.out, exist_ok=True)
    content = os.path.join(args.out, "cora.content")
    cites = os.path.join(args.out, "cora.cites")
    with open(content + ".tmp", "w") as f:
        for node_id, subject, feats in zip(nodes.nodeId, nodes.subject, nodes.features):
            f.write(str(node_id) + "\t" + "\t".join(str(int(x)) for x in feats) + "\t" + SUBJECTS[int(subject)] + "\n")
    os.replace(content + ".tmp", content)
    with open(cites + ".tmp", "w") as f:
        for src, dst in zip(rels.sourceNodeId, rels.targetNodeId):
            f.write(f"{src}\t{dst}\n")
    os.replace(cites + ".tmp", cites)
    print(f"wrote {len(nodes)} papers to {content}")
    print(f"wrote {len(rels)} citations to {cites}")


if __name__ == "__main__":
    main()
