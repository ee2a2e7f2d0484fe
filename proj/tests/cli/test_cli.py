#!/usr/bin/env python3
"""End-to-end checks of the geoval command line: outputs, exit codes, figures."""

import csv
import json
import os
import subprocess
import sys
import tempfile
import xml.etree.ElementTree as ET

CLI = os.path.abspath(sys.argv[1])
FAST = ["--set", "synth.n_samples=400", "--set", "gbrt.n_trees=30", "--set", "featsel.iterations=8"]
failures = []


def run(*args, cwd):
    return subprocess.run([CLI, "-q", *args], cwd=cwd, capture_output=True, text=True)


def check(cond, what):
    print(("ok   " if cond else "FAIL ") + what)
    if not cond:
        failures.append(what)


def write(path, text):
    with open(path, "w") as f:
        f.write(text)


def svg_ok(path):
    try:
        return ET.parse(path).getroot().tag.endswith("svg")
    except ET.ParseError:
        return False


def main():
    with tempfile.TemporaryDirectory() as tmp:
        small = os.path.join(tmp, "small.yaml")
        write(small, "seed: 4\nsynth: {n_strata: 3}\ntargets: [SOC]\nk: 3\nfeatsel: {top_k: 5}\n")

        r = run("run", "-c", small, *FAST, "-o", "out", cwd=tmp)
        check(r.returncode == 0, "run exits 0 " + r.stderr[-300:])
        report = json.load(open(os.path.join(tmp, "out", "report.json")))
        check(report["kind"] == "run" and report["schema_version"] == "1.0", "run report header")
        check(list(report)[-1] == "timing", "timing is the last report key")
        check(os.path.exists(os.path.join(tmp, "out", "model.json")), "model.json written")
        plots = sorted(os.listdir(os.path.join(tmp, "out", "plots")))
        check(plots == ["SOC_depth_ccc.svg", "SOC_obs_pred.svg", "SOC_stability.svg", "SOC_stratum_nrmse.svg"],
              "four figures: %s" % plots)
        check(all(svg_ok(os.path.join(tmp, "out", "plots", p)) for p in plots), "figures are well-formed SVG")

        r = run("plots", os.path.join(tmp, "out", "report.json"), "-o", "replot", cwd=tmp)
        check(r.returncode == 0 and len(os.listdir(os.path.join(tmp, "replot"))) == 4, "plots re-renders a report")

        r = run("synth", "-c", small, "--set", "synth.n_samples=300", "-o", "syn", cwd=tmp)
        check(r.returncode == 0, "synth exits 0")
        data = os.path.join(tmp, "syn", "synth.csv")
        with open(data) as f:
            rows = list(csv.DictReader(f))
        check(len(rows) == 300 and "SOC" in rows[0] and "lat" in rows[0], "synth CSV layout")
        truth = json.load(open(os.path.join(tmp, "syn", "synth_truth.json")))
        check("informative" in json.dumps(truth), "truth sidecar lists informative features")

        csv_cfg = os.path.join(tmp, "csv.yaml")
        write(csv_cfg, "seed: 4\ninput: %s\ntargets: [SOC]\nk: 3\nfeatsel: {iterations: 8, top_k: 5}\n"
                       "gbrt: {n_trees: 30}\n" % data)
        for verb, name in [("diagnose", "diagnose.json"), ("select", "select.json"), ("compare-cv", "compare_cv.json")]:
            r = run(verb, "-c", csv_cfg, "-o", verb, cwd=tmp)
            out = os.path.join(tmp, verb, name)
            check(r.returncode == 0 and os.path.exists(out), "%s on CSV input writes %s" % (verb, name))
        cmp = json.load(open(os.path.join(tmp, "compare-cv", "compare_cv.json")))
        check(cmp["modes"] == ["blocked", "random"], "compare-cv lists both modes")

        preds = os.path.join(tmp, "preds.csv")
        with open(preds, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["target", "observed", "predicted", "stratum"])
            for p in report["targets"][0]["predictions"]:
                if p["observed"] is not None and p["set"] == "oof":
                    w.writerow(["SOC", p["observed"], p["predicted"], p["stratum"]])
        r = run("evaluate", preds, "--stratum-column", "stratum", "-o", "ev", cwd=tmp)
        check(r.returncode == 0, "evaluate exits 0 " + r.stderr[-300:])
        ev = json.load(open(os.path.join(tmp, "ev", "evaluation.json")))
        pooled = ev["targets"][0]["pooled"]
        oof = report["targets"][0]["metrics"]["oof"]["pooled"]
        check(abs(pooled["rmse"] - oof["rmse"]) <= 1e-9 * max(1.0, oof["rmse"]),
              "evaluate reproduces the run's pooled OOF RMSE")
        check(r.stdout.startswith("target,scope,group,label,n,RMSE"), "evaluate prints the metrics table")

        r = run("run", "-c", small, "--set", "k=1", "-o", "bad", cwd=tmp)
        check(r.returncode == 2 and "k must be at least 2" in r.stderr, "invalid k exits 2")
        r = run("run", "-c", small, "--set", "bogus=1", "-o", "bad", cwd=tmp)
        check(r.returncode == 2 and "bogus" in r.stderr, "unknown key exits 2")

        bad_csv = os.path.join(tmp, "bad.csv")
        with open(data) as f:
            lines = f.read().splitlines()
        header = lines[0].split(",")
        fields = lines[1].split(",")
        fields[header.index("lat")] = "95"
        write(bad_csv, "\n".join([lines[0], ",".join(fields)] + lines[2:]) + "\n")
        r = run("diagnose", "-c", csv_cfg, "--input", bad_csv, "-o", "badrow", cwd=tmp)
        diag = json.load(open(os.path.join(tmp, "badrow", "diagnose.json")))
        rejected = diag["dataset"]["rejected_rows"]
        check(r.returncode == 0 and len(rejected) == 1 and rejected[0]["column"] == "lat",
              "an out-of-range latitude rejects that row only")
        no_lat = os.path.join(tmp, "nolat.csv")
        keep = [i for i, h in enumerate(header) if h != "lat"]
        write(no_lat, "\n".join(",".join(l.split(",")[i] for i in keep) for l in lines) + "\n")
        r = run("run", "-c", csv_cfg, "--input", no_lat, "-o", "bad", cwd=tmp)
        check(r.returncode == 3 and "lat" in r.stderr, "missing lat column exits 3: " + r.stderr[-200:])
        r = run("evaluate", preds, "--observed", "nope", "-o", "bad", cwd=tmp)
        check(r.returncode == 3, "missing evaluate column exits 3")

    print("%d failure(s)" % len(failures))
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
