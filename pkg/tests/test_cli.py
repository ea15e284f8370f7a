"""Config parsing, stage orchestration, manifest determinism, CLI behavior."""

import json
from pathlib import Path

import pandas as pd
import pytest

from airpanel import cli, config, pipeline, report, synth
from airpanel.errors import ConfigError


def write_bundle(tmp_path: Path, **synth_kwargs) -> Path:
    bundle = tmp_path / "bundle"
    cfg = synth.DgpConfig(
        n_majors=4, n_regionals=3, n_airports=12, n_markets=24, n_periods=3,
        seed=17, **synth_kwargs,
    )
    synth.generate(cfg, bundle)
    return bundle


def run_config_text(bundle: Path, out: Path, extra: str = "") -> str:
    lines = [
        f'inputs.{n} = "{bundle}/{n}.csv"'
        for n in ("coupons", "tickets", "markets", "ownership", "weather",
                  "airport_stations", "airport_states", "cpi")
    ]
    lines += [f'out = "{out}"', "seed = 5", "bootstrap.replicates = 15"]
    return "\n".join(lines) + "\n" + extra


class TestConfigParsing:
    def test_flat_text_grammar(self):
        flat = config.parse_flat_text(
            """
            # comment
            seed = 7
            quarters = [1, 2]
            name = "quoted string"
            ratio = 0.5
            flag = true
            empty_list = []
            """
        )
        assert flat["seed"] == 7
        assert flat["quarters"] == [1, 2]
        assert flat["name"] == "quoted string"
        assert flat["ratio"] == 0.5
        assert flat["flag"] is True
        assert flat["empty_list"] == []

    def test_bad_line_raises(self):
        with pytest.raises(ConfigError, match="line 1"):
            config.parse_flat_text("not a key value")

    def test_toml_and_json_flatten(self, tmp_path):
        toml = tmp_path / "c.toml"
        toml.write_text("seed = 3\n[bootstrap]\nreplicates = 9\n")
        flat = config.load_config_file(toml)
        assert flat["bootstrap.replicates"] == 9
        js = tmp_path / "c.json"
        js.write_text(json.dumps({"seed": 3, "bootstrap": {"replicates": 9}}))
        assert config.load_config_file(js)["bootstrap.replicates"] == 9

    def test_spec_blocks(self):
        cfg = config.build_run_config(
            {
                "spec.main.dependent": "log_traffic",
                "spec.main.endogenous": ["csc_baseline"],
                "spec.main.bins.csc_baseline": ["a:1998:2000", "b:2001:2016"],
                "spec.main.iv_map.csc_baseline": ["comp_wx_precipitation"],
            }
        )
        assert len(cfg.specs) == 1
        spec = cfg.specs[0]
        assert spec.dependent == "log_traffic"
        assert spec.interactions["csc_baseline"][0].label == "a"
        assert spec.iv_map["csc_baseline"] == ["comp_wx_precipitation"]

    def test_default_specs_when_none_configured(self):
        cfg = config.build_run_config({})
        assert [s.name for s in cfg.specs] == ["fe_ols", "cf_baseline"]

    def test_bad_values_rejected(self):
        with pytest.raises(ConfigError, match="quarters"):
            config.build_run_config({"quarters": [5]})
        with pytest.raises(ConfigError, match="bin"):
            config.build_run_config({"spec.s.bins.x": ["nocolons"]})
        with pytest.raises(ConfigError, match="synth"):
            config.build_run_config({"synth.not_a_knob": 3})

    def test_synth_keys_typed(self):
        cfg = config.build_run_config({"synth.n_markets": 44, "seed": 9})
        assert cfg.synth.n_markets == 44
        assert cfg.synth.seed == 9


class TestPipeline:
    def test_full_run_and_manifest_determinism(self, tmp_path):
        bundle = write_bundle(tmp_path)
        conf = tmp_path / "run.conf"
        conf.write_text(run_config_text(bundle, tmp_path / "out1"))
        cfg1 = config.load_run_config(conf, {"out": str(tmp_path / "out1")})
        doc1 = pipeline.run_pipeline(cfg1)
        cfg2 = config.load_run_config(conf, {"out": str(tmp_path / "out2")})
        doc2 = pipeline.run_pipeline(cfg2)
        h1 = {s["stage"]: s["outputs"] for s in doc1["stages"]}
        h2 = {s["stage"]: s["outputs"] for s in doc2["stages"]}
        assert h1 == h2
        assert (tmp_path / "out1" / "manifest.json").exists()
        for name in ("sample.csv", "panel.csv", "metrics.csv", "instruments.csv",
                     "fit_cf_baseline.csv", "report.txt"):
            assert (tmp_path / "out1" / name).exists(), name

    def test_stages_run_individually(self, tmp_path):
        bundle = write_bundle(tmp_path)
        out = tmp_path / "out"
        conf = tmp_path / "run.conf"
        conf.write_text(run_config_text(bundle, out))
        for stage in ("ingest", "build-sample", "panel", "metrics"):
            cfg = config.load_run_config(conf)
            manifest = []
            pipeline.run_stage(stage, cfg, manifest)
            assert manifest[0]["stage"] == stage

    def test_missing_weather_aborts_at_instruments(self, tmp_path):
        bundle = write_bundle(tmp_path)
        (bundle / "weather.csv").unlink()
        out = tmp_path / "out"
        conf = tmp_path / "run.conf"
        conf.write_text(run_config_text(bundle, out))
        cfg = config.load_run_config(conf)
        with pytest.raises(pipeline.StageError) as err:
            pipeline.run_pipeline(cfg)
        assert err.value.stage == "instruments"
        assert "weather" in str(err.value)
        # Earlier stages completed and left their checkpoints behind.
        assert (out / "panel.csv").exists()
        assert (out / "metrics.csv").exists()

    def test_failed_stage_leaves_partial_outputs(self, tmp_path):
        bundle = write_bundle(tmp_path)
        out = tmp_path / "out"
        conf = tmp_path / "run.conf"
        # Reference a deflator table that misses the synthetic years.
        bad_cpi = tmp_path / "bad_cpi.csv"
        bad_cpi.write_text("year,deflator\n1900,1.0\n")
        text = run_config_text(bundle, out).replace(
            f'inputs.cpi = "{bundle}/cpi.csv"', f'inputs.cpi = "{bad_cpi}"'
        )
        conf.write_text(text)
        cfg = config.load_run_config(conf)
        with pytest.raises(pipeline.StageError) as err:
            pipeline.run_pipeline(cfg)
        assert err.value.stage == "build-sample"
        assert not (out / "sample.csv").exists()

    def test_rejects_written_per_input(self, tmp_path):
        bundle = write_bundle(tmp_path)
        coupons = bundle / "coupons.csv"
        text = coupons.read_text().splitlines()
        text.insert(1, "BAD,1,AA,OO,P,P,0,10,1998,2")
        coupons.write_text("\n".join(text) + "\n")
        out = tmp_path / "out"
        conf = tmp_path / "run.conf"
        conf.write_text(run_config_text(bundle, out))
        cfg = config.load_run_config(conf)
        manifest = []
        pipeline.run_stage("ingest", cfg, manifest)
        rejects = pd.read_csv(out / "coupons.rejects.csv")
        assert len(rejects) == 1
        assert rejects["line"].iloc[0] == 2


class TestCli:
    def test_synth_then_run_exit_codes(self, tmp_path, capsys):
        bundle = tmp_path / "bundle"
        sconf = tmp_path / "s.conf"
        sconf.write_text(
            f'out = "{bundle}"\nseed = 3\nsynth.n_majors = 4\nsynth.n_regionals = 3\n'
            "synth.n_airports = 12\nsynth.n_markets = 24\nsynth.n_periods = 3\n"
        )
        assert cli.main(["synth", "--config", str(sconf)]) == 0
        out = tmp_path / "out"
        rconf = tmp_path / "r.conf"
        rconf.write_text(run_config_text(bundle, out))
        assert cli.main(["run", "--config", str(rconf)]) == 0
        assert (out / "manifest.json").exists()
        assert cli.main(["report", "--config", str(rconf)]) == 0
        captured = capsys.readouterr()
        assert "fit: cf_baseline" in captured.out

    def test_cli_error_is_nonzero_and_named(self, tmp_path, capsys):
        conf = tmp_path / "r.conf"
        conf.write_text('inputs.coupons = "/nonexistent/coupons.csv"\n')
        code = cli.main(["run", "--config", str(conf), "--out", str(tmp_path / "o")])
        captured = capsys.readouterr()
        assert code == 1
        assert "ingest" in captured.err

    def test_quarters_flag_parsed(self, tmp_path):
        cfg = config.load_run_config(None, {"quarters": [1, 2]})
        assert cfg.quarters == (1, 2)


class TestReportRendering:
    def test_empty_effects_grid_has_header(self):
        text = report.render_effects_grid(pd.DataFrame(columns=["variable", "bin", "percent_linear"]))
        assert "IQR price effects" in text
        assert "(no effects)" in text

    def test_single_fit_block(self, tmp_path):
        pd.DataFrame(
            [{"term": "x", "coefficient": 0.5, "se": 0.1, "se_classical": 0.1,
              "se_robust": 0.1, "se_bootstrap": 0.1, "p_value": 0.0, "stars": "***"}]
        ).to_csv(tmp_path / "fit_demo.csv", index=False)
        text = report.render_fit_report("demo", tmp_path)
        assert "fit: demo" in text
        assert "0.5000" in text

    def test_effects_grid_shape(self):
        eff = pd.DataFrame(
            [
                {"variable": "csc_baseline", "bin": "pre", "percent_linear": 0.06},
                {"variable": "csc_baseline", "bin": "post", "percent_linear": 5.07},
                {"variable": "regional_share", "bin": "pre", "percent_linear": 0.0},
                {"variable": "regional_share", "bin": "post", "percent_linear": -7.42},
            ]
        )
        text = report.render_effects_grid(eff)
        lines = text.splitlines()
        assert lines[1].split() == ["period", "csc_baseline", "regional_share"]
        assert any("pre" in ln for ln in lines)
        assert any("-7.42%" in ln for ln in lines)
