import json
import subprocess
import sys

import pytest

from scaleup_model import ConfigError, load_scenario, reproduce, run, sweep
from scaleup_model.cli import main
from scaleup_model.scenario import (apply_overrides, bundled_scenario_paths, load_bundled,
                                    scenario_from_dict)
from scaleup_model.technology import PASSAGE


@pytest.fixture
def passage_raw():
    return json.loads(bundled_scenario_paths()[8].read_text())


def write(tmp_path, name, raw):
    path = tmp_path / name
    path.write_text(json.dumps(raw, indent=2))
    return path


def test_bundled_set():
    names = [p.stem for p in bundled_scenario_paths()]
    assert len(names) == 12
    assert "paper_passage_config1" in names


@pytest.mark.parametrize("path", bundled_scenario_paths(), ids=lambda p: p.stem)
def test_every_bundled_scenario_validates(path):
    load_scenario(path)


def test_load_echoes_parallelism():
    lines = []
    s = load_bundled("paper_passage_config1", echo=lines.append)
    assert (s.parallelism.tp, s.parallelism.dp, s.parallelism.pp) == (16, 256, 8)
    assert "tp=16, dp=256, pp=8" in lines[0]
    # microbatches is left unset in the bundled files, so it is echoed as a default
    assert any("parallelism.microbatches" in line for line in lines)


def test_product_violation_named(tmp_path, passage_raw):
    passage_raw["parallelism"]["dp"] = 128
    with pytest.raises(ConfigError) as err:
        load_scenario(write(tmp_path, "bad.json", passage_raw))
    assert err.value.constraint == "tp*dp*pp == total_gpus"


def test_unknown_key_listed(tmp_path, passage_raw):
    passage_raw["parallelism"]["tpp"] = 4
    with pytest.raises(ConfigError, match="tpp"):
        load_scenario(write(tmp_path, "bad.json", passage_raw))
    passage_raw["parallelism"].pop("tpp")
    passage_raw["extras"] = 1
    with pytest.raises(ConfigError, match="extras"):
        load_scenario(write(tmp_path, "bad.json", passage_raw))


def test_parse_error_has_line_and_column(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text('{\n  "id": "x",\n  "model": {,}\n}\n')
    with pytest.raises(ConfigError, match=r"broken.json:3:13"):
        load_scenario(path)


def test_seq_len_mismatch(passage_raw):
    passage_raw["workload"]["seq_len"] = 4096
    with pytest.raises(ConfigError) as err:
        scenario_from_dict(passage_raw)
    assert err.value.constraint == "workload.seq_len == model.seq_len"


def test_alpha_override_knob(passage_raw):
    passage_raw["knobs"]["alpha_scale_up"] = 0.0
    s = scenario_from_dict(passage_raw)
    assert s.cluster.scale_up_link.latency_alpha == 0.0


def test_overrides_apply_dotted_keys(passage_raw):
    raw = apply_overrides(passage_raw, ["cluster.pod_size=144", "knobs.ep_spill=scale_out_only"])
    s = scenario_from_dict(raw)
    assert s.cluster.pod_size == 144
    assert s.knobs.ep_spill == "scale_out_only"
    assert passage_raw["cluster"]["pod_size"] == 512


def test_technologies_roundtrip(passage_raw):
    passage_raw["technologies"] = [PASSAGE.to_dict()]
    s = scenario_from_dict(json.loads(json.dumps(passage_raw)))
    assert s.technologies == (PASSAGE,)


def test_self_normalization():
    s = load_bundled("paper_passage_config1")
    base = run(s)
    assert base.normalized == 1.0
    assert run(s, base).normalized == 1.0


def test_sweep_order_and_baseline(monkeypatch):
    monkeypatch.setenv("SCALEUP_MODEL_THREADS", "3")
    scenarios = [load_bundled(f"paper_alt144_config{c}") for c in (4, 3, 2, 1)]
    rows = sweep(scenarios, "paper_alt144_config2")
    assert [r.scenario for r in rows] == [s.id for s in scenarios]
    assert rows[2].normalized == 1.0
    serial = [run(s) for s in scenarios]
    assert [r.time_to_train for r in rows] == [r.time_to_train for r in serial]


def test_thread_env_validation(monkeypatch):
    monkeypatch.setenv("SCALEUP_MODEL_THREADS", "zero")
    with pytest.raises(ConfigError):
        sweep([load_bundled("paper_passage_config1")])


def test_table4_rows():
    rows = reproduce("table4").rows
    assert rows == [["lpo", 5.0, 8.0, 13.0], ["cpo", 9.7, 2.3, 12.0],
                    ["passage", 3.2, 1.1, 4.3]]


def test_fig9_rows():
    table = reproduce("fig9")
    assert len(table.rows) == 8
    norm = {r[0]: r[-1] for r in table.rows}
    assert norm["paper_passage_config1"] == 1.0
    assert norm["paper_alt144_config1"] == pytest.approx(1.6, rel=0.2)
    assert norm["paper_alt144_config4"] == pytest.approx(2.7, rel=0.2)


def test_unknown_target_lists_available(capsys):
    assert main(["reproduce", "fig10"]) == 2
    err = capsys.readouterr().err
    for target in ("table4", "fig7", "fig8-area", "fig8", "fig9"):
        assert target in err


def test_csv_is_byte_stable(capsys):
    main(["reproduce", "fig8"])
    first = capsys.readouterr().out
    main(["reproduce", "fig8"])
    assert capsys.readouterr().out == first
    assert first.splitlines()[0] == ("scenario,compute_s,tp_comm_s,ep_comm_s,pp_bubble_s,"
                                     "dp_sync_s,step_s,steps,time_to_train_s,normalized")


def test_run_and_sweep_commands(tmp_path, capsys):
    src = bundled_scenario_paths()
    for p in src[8:10]:
        (tmp_path / p.name).write_text(p.read_text())
    out = tmp_path / "out.csv"
    assert main(["sweep", str(tmp_path), "--baseline", "paper_passage_config2",
                 "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert len(lines) == 3 and lines[2].endswith(",1.0")
    assert main(["run", str(src[8]), "--set", "knobs.efficiency=0.5"]) == 0
    assert "paper_passage_config1" in capsys.readouterr().out


def test_invalid_scenario_exit_code(tmp_path, passage_raw):
    passage_raw["parallelism"]["tpp"] = 1
    assert main(["run", str(write(tmp_path, "bad.json", passage_raw))]) == 2


def test_console_script_entry_point():
    proc = subprocess.run([sys.executable, "-m", "scaleup_model.cli", "reproduce", "table4",
                           "--check"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert proc.stdout.startswith("technology,")
