import numpy as np
import pytest

import cocyclelab as cl
from cocyclelab import io as fmt
from cocyclelab.cli import main
from cocyclelab.cocycle import CocyclePath, LinearCocycle


@pytest.fixture(scope="module")
def kit_file(tmp_path_factory, base_kit):
    p = tmp_path_factory.mktemp("cli") / "kit.txt"
    p.write_text(fmt.dump_kit(base_kit))
    return str(p)


@pytest.fixture(scope="module")
def witness_file(tmp_path_factory, base_witness):
    p = tmp_path_factory.mktemp("cli") / "witness.txt"
    p.write_text(fmt.dump_path(base_witness))
    return str(p)


class TestVerifyFlex:
    def test_witness_passes(self, witness_file, tmp_path):
        out = tmp_path / "o"
        assert main(["verify-flex", "--path-file", witness_file,
                     "--epsilon", "0.6", "--out", str(out)]) == 0
        text = (out / "flex_report.txt").read_text()
        assert "[pass]" in text and "config:" in text and "seed = 0" in text

    def test_constant_saddle_fails(self, tmp_path):
        c = LinearCocycle(np.diag([0.5, 0.9])[None])
        p = CocyclePath.from_cocycles([-1.0, 0.0, 1.0], [c, c, c])
        f = tmp_path / "saddle.txt"
        f.write_text(fmt.dump_path(p))
        assert main(["verify-flex", "--path-file", str(f),
                     "--epsilon", "0.5", "--out", str(tmp_path / "o")]) == 1

    def test_malformed_exits_2(self, tmp_path):
        f = tmp_path / "bad.txt"
        f.write_text("cocyclelab 1\npath t=0,1\ncocycle n=1\n1 0 0\n")
        assert main(["verify-flex", "--path-file", str(f),
                     "--out", str(tmp_path / "o")]) == 2

    def test_missing_file_exits_2(self, tmp_path):
        assert main(["verify-flex", "--path-file", str(tmp_path / "nope.txt"),
                     "--out", str(tmp_path / "o")]) == 2

    def test_unknown_flag_exits_2(self):
        assert main(["verify-flex", "--nonsense"]) == 2


class TestAssemble:
    def test_assemble_writes_witness(self, kit_file, tmp_path):
        out = tmp_path / "o"
        assert main(["assemble", "--kit-file", kit_file,
                     "--epsilon", "0.6", "--out", str(out)]) == 0
        witness = fmt.load_path((out / "witness.txt").read_text())
        assert cl.verify_flexible(witness, 0.6).passed

    def test_deterministic_bytes(self, kit_file, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        main(["assemble", "--kit-file", kit_file, "--epsilon", "0.6", "--out", str(a)])
        main(["assemble", "--kit-file", kit_file, "--epsilon", "0.6", "--out", str(b)])
        assert (a / "witness.txt").read_bytes() == (b / "witness.txt").read_bytes()

    def test_infeasible_kit(self, tmp_path):
        kit = cl.TransitionKit(0.8, 0.3, 0.9, np.eye(2), np.eye(2))
        f = tmp_path / "kit.txt"
        f.write_text(fmt.dump_kit(kit))
        out = tmp_path / "o"
        assert main(["assemble", "--kit-file", str(f),
                     "--epsilon", "0.05", "--out", str(out)]) == 1
        assert "INFEASIBLE" in (out / "assemble_report.txt").read_text()


class TestPipelines:
    def test_retard_report(self, witness_file, tmp_path):
        out = tmp_path / "o"
        assert main(["retard", "--witness-file", witness_file, "--m", "4",
                     "--epsilon", "0.6", "--grid-radial", "6",
                     "--grid-angular", "12", "--out", str(out)]) == 0
        text = (out / "retard_report.txt").read_text()
        assert "retardable check (pass)" in text
        assert "homothetic region" in text

    def test_trace_and_project(self, witness_file, tmp_path):
        out = tmp_path / "o"
        assert main(["trace-wss", "--witness-file", witness_file, "--m", "2",
                     "--epsilon", "0.6", "--out", str(out)]) == 0
        m1 = fmt.read_curve_csv((out / "meridian1.csv").read_text())
        assert m1.homology == (1, 0)
        assert (out / "meridians.svg").read_text().count("<polyline") >= 2

        pts = tmp_path / "pts.csv"
        pts.write_text("x,y\n0.001,0.002\n-0.003,0.001\n")
        out2 = tmp_path / "o2"
        assert main(["project", "--witness-file", witness_file, "--m", "2",
                     "--epsilon", "0.6", "--points-csv", str(pts),
                     "--out", str(out2)]) == 0
        rows = (out2 / "projected.csv").read_text().splitlines()
        assert rows[0] == "u,v" and len(rows) == 3
        u, v = map(float, rows[1].split(","))
        assert 0 <= u < 1 and 0 <= v < 1

    def test_fragment_command(self, base_meridians, tmp_path):
        from cocyclelab.steering import make_shift_targets

        targets = make_shift_targets(base_meridians, 0.1)
        files = []
        for name, curve in [("c1", base_meridians[0]), ("c2", base_meridians[1]),
                            ("t1", targets[0]), ("t2", targets[1])]:
            f = tmp_path / f"{name}.csv"
            f.write_text(fmt.write_curve_csv(curve))
            files.append(str(f))
        out = tmp_path / "o"
        assert main(["fragment", "--curves", files[0], files[1],
                     "--targets", files[2], files[3],
                     "--mu", "0.08", "--out", str(out)]) == 0
        text = (out / "fragment_report.txt").read_text()
        assert "factors:" in text


class TestDemo:
    def test_demo_shift_family(self, kit_file, tmp_path):
        out = tmp_path / "demo"
        rc = main(["demo-theorem1", "--kit-file", kit_file, "--family", "shift",
                   "--epsilon", "0.6", "--epsilon0", "0.12",
                   "--grid-radial", "8", "--grid-angular", "32", "--out", str(out)])
        report = (out / "demo_report.txt").read_text()
        assert rc == 0, report
        assert "meridian steering (pass)" in report
        for k in (1, 2):
            for tag in ("before", "after", "target"):
                assert (out / f"meridian{k}_{tag}.csv").exists()
        after = fmt.read_curve_csv((out / "meridian1_after.csv").read_text())
        target = fmt.read_curve_csv((out / "meridian1_target.csv").read_text())
        from cocyclelab.manifold import curve_hausdorff

        assert curve_hausdorff(after, target) < 1e-3

    def test_demo_rejects_bad_homology(self, kit_file, base_meridians, tmp_path):
        double = np.concatenate([base_meridians[0].uv[:-1],
                                 base_meridians[0].uv + np.array([1.0, 0.0])])
        t1 = tmp_path / "t1.csv"
        t1.write_text(fmt.write_curve_csv(cl.TorusCurve(double)))
        t2 = tmp_path / "t2.csv"
        t2.write_text(fmt.write_curve_csv(base_meridians[1]))
        out = tmp_path / "o"
        rc = main(["demo-theorem1", "--kit-file", kit_file,
                   "--targets", str(t1), str(t2),
                   "--epsilon", "0.6", "--epsilon0", "0.12", "--out", str(out)])
        assert rc == 1
        assert "REJECTED" in (out / "demo_report.txt").read_text()
