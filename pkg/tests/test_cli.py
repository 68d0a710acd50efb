import json

import pytest

from ultralip.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestScalarCommands:
    def test_ord(self, capsys):
        code, out, _ = run(capsys, "ord", "-p", "3", "45/2")
        assert code == 0
        assert out.strip() == "2"

    def test_ord_of_zero(self, capsys):
        code, out, _ = run(capsys, "ord", "-p", "5", "0")
        assert code == 0
        assert out.strip() == "+inf"

    def test_ac(self, capsys):
        code, out, _ = run(capsys, "ac", "-p", "3", "-n", "2", "45")
        assert code == 0
        assert out.strip() == "5 mod 3^2"

    def test_eval(self, capsys):
        code, out, _ = run(capsys, "eval", "-p", "5", "-f", "(t-1)*t/(t+2)", "--at", "t=3")
        assert code == 0
        assert out.startswith("6/5")

    def test_eval_json(self, capsys):
        code, out, _ = run(
            capsys, "eval", "-p", "5", "-f", "(t-1)*t/(t+2)", "--at", "t=3", "--json"
        )
        assert code == 0
        assert json.loads(out) == {"value": "6/5", "ord": "-1", "norm": "5^1"}


class TestRegionsCommands:
    def test_ball_of_cell(self, capsys):
        code, out, _ = run(
            capsys, "ball-of-cell", "-p", "3",
            "--cell", "cell(center=0; coset=1*Q(1,1); all)", "--t", "4",
        )
        assert code == 0
        assert out.strip() == "1 + 3^1"

    def test_enumerate_balls(self, capsys):
        code, out, _ = run(
            capsys, "enumerate-balls", "-p", "3",
            "--cell", "cell(center=0; coset=1*Q(1,2); all)", "--window=0:4",
        )
        assert code == 0
        assert out.splitlines() == ["1 + 3^1", "9 + 3^3", "81 + 3^5"]

    def test_coset_flag_replaces_cell_literal(self, capsys):
        code, out, _ = run(
            capsys, "enumerate-balls", "-p", "3", "--coset", "1*Q(1,2)", "--window=0:4"
        )
        assert code == 0
        assert out.splitlines() == ["1 + 3^1", "9 + 3^3", "81 + 3^5"]

    def test_center_flag(self, capsys):
        code, out, _ = run(
            capsys, "ball-of-cell", "-p", "3", "--center", "1",
            "--coset", "1*Q(1,1)", "--t", "2",
        )
        assert code == 0
        assert out.strip() == "2 + 3^1"

    def test_missing_cell_and_coset_exit_two(self, capsys):
        code, _, err = run(capsys, "enumerate-balls", "-p", "3", "--window=0:1")
        assert code == 2


class TestJacobianCommands:
    def test_certificate_exit_zero(self, capsys):
        code, out, _ = run(
            capsys, "jacobian", "-p", "3", "-f", "x^2", "--ball", "1 + 3^1", "-M", "3"
        )
        assert code == 0
        assert "jac_ord = 0" in out

    def test_violation_exit_one(self, capsys):
        code, out, _ = run(
            capsys, "jacobian", "-p", "3", "-f", "x^2", "--ball", "0 + 3^1", "-M", "3"
        )
        assert code == 1
        assert "violation" in out

    def test_json_schema(self, capsys):
        code, out, _ = run(
            capsys, "jacobian", "-p", "3", "-f", "x^2", "--ball", "1 + 3^1",
            "-M", "3", "--json",
        )
        payload = json.loads(out)
        assert payload == {
            "ball": {"center": "1", "radius_ord": 1},
            "image": {"center": "1", "radius_ord": 1},
            "jac_ord": 0,
            "depth": 3,
        }

    def test_map_ball(self, capsys):
        code, out, _ = run(
            capsys, "map-ball", "-p", "3", "-f", "x^3", "--ball", "1 + 3^1", "-M", "2"
        )
        assert code == 0
        assert out.strip() == "1 + 3^2"

    def test_correspondence(self, capsys):
        code, out, _ = run(
            capsys, "correspondence", "-p", "3", "-f", "x^2",
            "--cell", "cell(center=0; coset=1*Q(1,1); all; var=x)",
            "--window=0:3", "-M", "3",
        )
        assert code == 0
        assert "coset=1*Q(1,2)" in out


class TestLipschitzCommands:
    def test_empirical(self, capsys):
        code, out, _ = run(
            capsys, "lipschitz", "-p", "3", "-f", "3*t", "--window=0:2", "-M", "2"
        )
        assert code == 0
        assert "C = 3^-1" in out

    def test_certify(self, capsys):
        code, out, _ = run(
            capsys, "certify", "-p", "3", "-f", "x^2",
            "--cell", "cell(center=0; coset=1*Q(1,1); all; var=x)",
            "--window=0:3", "-M", "3", "--epsilon-exponent", "0",
        )
        assert code == 0
        assert "C = 3^0" in out

    def test_certify_failure_exit_one(self, capsys):
        code, out, _ = run(
            capsys, "certify", "-p", "3", "-f", "normval(x)",
            "--cell", "cell(center=0; coset=1*Q(1,1); all; var=x)",
            "--window=0:2", "-M", "2",
        )
        assert code == 1
        assert "failed" in out


class TestPrepareCommand:
    def test_prepare_verify(self, capsys):
        code, out, _ = run(
            capsys, "prepare", "-p", "5", "-f", "1 * (t - 0) * (t - 1)",
            "--window=-2:3", "--verify", "-M", "3",
        )
        assert code == 0
        assert "all pieces pass" in out


class TestExamples:
    def test_exloc2_ratios(self, capsys):
        code, out, _ = run(capsys, "example", "exloc2", "-p", "3", "--levels", "5", "--json")
        assert code == 0
        payload = json.loads(out)
        assert [e["ratio_exponent"] for e in payload["entries"]] == [0, 1, 2, 3, 4]
        assert [d["quotient_exponent"] for d in payload["derivative_trace"]] == [
            -1, -2, -3, -4, -5,
        ]

    def test_exloc(self, capsys):
        code, out, _ = run(capsys, "example", "exloc", "-p", "3", "--window=0:4", "-M", "2")
        assert code == 0
        assert "ratio" in out


class TestContract:
    def test_usage_error_exit_two(self, capsys):
        with pytest.raises(SystemExit) as err:
            main(["jacobian", "-p", "3"])  # missing required arguments
        assert err.value.code == 2

    def test_bad_prime_exit_two(self, capsys):
        code, _, err = run(capsys, "ord", "-p", "4", "1")
        assert code == 2
        assert "error" in err

    def test_bad_ball_literal_exit_two(self, capsys):
        code, _, err = run(
            capsys, "jacobian", "-p", "3", "-f", "x", "--ball", "1 + 5^1", "-M", "2"
        )
        assert code == 2

    def test_parse_error_exit_two(self, capsys):
        code, _, err = run(capsys, "eval", "-p", "3", "-f", "t +* 1", "--at", "t=1")
        assert code == 2

    def test_depth_zero_exit_two(self, capsys):
        code, _, err = run(
            capsys, "jacobian", "-p", "3", "-f", "x", "--ball", "1 + 3^1", "-M", "0"
        )
        assert code == 2

    def test_json_outputs_reproducible(self, capsys):
        args = [
            "certify", "-p", "3", "-f", "x^2",
            "--cell", "cell(center=0; coset=1*Q(1,1); all; var=x)",
            "--window=0:3", "-M", "3", "--json",
        ]
        _, first, _ = run(capsys, *args)
        _, second, _ = run(capsys, *args)
        assert first == second
        json.loads(first)
