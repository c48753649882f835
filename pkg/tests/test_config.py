"""TOML scenario loading: strict keys, kernel admissibility, refinement ladders."""
import copy

import numpy as np
import pytest

from efviz.config import ConfigError, build_config, load_document, parse_config
from efviz.solver import V_FORM, StandingWaveSolution


def base_doc():
    return {
        "p": 3.0,
        "tau_max": 1.0,
        "grid": {"r1": 0.0, "r2": 1.0, "n": 50},
        "kernel": {"type": "expsum", "terms": [[0.25, 1.0]]},
        "initial": {"u0": {"preset": "sine", "amplitude": 0.05}},
    }


def variant(**edits):
    doc = base_doc()
    for dotted, value in edits.items():
        keys = dotted.split("__")
        node = doc
        for k in keys[:-1]:
            node = node.setdefault(k, {})
        node[keys[-1]] = value
    return doc


class TestMinimalDocument:
    def test_defaults(self):
        cfg = build_config(base_doc())
        assert cfg.form == "w_form"
        assert cfg.dtau == 0.5 * cfg.grid.dx
        assert cfg.record_every == 1
        assert cfg.blowup_threshold == 1e8
        assert cfg.power_mode == "odd"
        assert np.all(cfg.u1 == 0.0)
        assert cfg.manufactured is None

    def test_omitted_kernel_is_null(self):
        doc = base_doc()
        del doc["kernel"]
        cfg = build_config(doc)
        assert cfg.kernel.is_null

    def test_explicit_settings_land(self):
        doc = variant(form=V_FORM, record_every=5, blowup_threshold=1e6,
                      dtau=0.005, cfl_safety=0.6)
        cfg = build_config(doc)
        assert cfg.form == V_FORM
        assert cfg.record_every == 5
        assert cfg.blowup_threshold == 1e6
        assert cfg.dtau == 0.005

    def test_manufactured_lookup(self):
        cfg = build_config(variant(manufactured="standing_wave"))
        assert isinstance(cfg.manufactured, StandingWaveSolution)
        with pytest.raises(ConfigError, match="manufactured must be one of"):
            build_config(variant(manufactured="no_such_solution"))


class TestStrictKeys:
    @pytest.mark.parametrize("doc,needle", [
        (variant(tau_mx=1.0), "tau_mx"),
        (variant(grid__size=10), "size"),
        (variant(kernel__rate=2.0), "rate"),
        (variant(initial__u2={}), "u2"),
        (variant(initial__u0__shape="sine"), "shape"),
        (variant(initial__u1__ampl=1.0), "ampl"),
    ])
    def test_unknown_key_rejected(self, doc, needle):
        with pytest.raises(ConfigError, match=needle):
            build_config(doc)

    def test_missing_grid(self):
        doc = base_doc()
        del doc["grid"]
        with pytest.raises(ConfigError, match=r"missing \[grid\]"):
            build_config(doc)

    def test_missing_required_number(self):
        doc = base_doc()
        del doc["p"]
        with pytest.raises(ConfigError, match="config.p is required"):
            build_config(doc)

    def test_boolean_is_not_a_number(self):
        with pytest.raises(ConfigError, match="dtau"):
            build_config(variant(dtau=True))

    def test_fractional_record_every_rejected(self):
        with pytest.raises(ConfigError, match="record_every"):
            build_config(variant(record_every=1.5))


class TestConstraints:
    def test_inadmissible_kernel_mass(self):
        with pytest.raises(ConfigError, match="mass"):
            build_config(variant(kernel__terms=[[0.6, 1.0]]))

    def test_subcritical_exponent(self):
        with pytest.raises(ConfigError, match="p > 1"):
            build_config(variant(p=0.5))

    def test_cfl_violation_surfaces_as_config_error(self):
        with pytest.raises(ConfigError, match="stability budget"):
            build_config(variant(dtau=0.1))

    def test_degenerate_interval(self):
        with pytest.raises(ConfigError, match="grid"):
            build_config(variant(grid__r2=0.0))

    def test_kernel_type_unknown(self):
        with pytest.raises(ConfigError, match="kernel.type"):
            build_config(variant(kernel__type="gaussian"))

    def test_tabulated_needs_both_arrays(self):
        doc = base_doc()
        doc["kernel"] = {"type": "tabulated", "s": [0.0, 1.0]}
        with pytest.raises(ConfigError, match="both s and mu"):
            build_config(doc)

    def test_tabulated_kernel_builds(self):
        doc = base_doc()
        doc["kernel"] = {"type": "tabulated", "s": [0.0, 1.0], "mu": [0.2, 0.0]}
        cfg = build_config(doc)
        assert cfg.kernel.family == "tabulated"


class TestInitialData:
    def test_nodal_values_accepted(self):
        n = 50
        vals = list(np.sin(np.pi * (np.arange(1, n + 1) / (n + 1))))
        doc = base_doc()
        doc["initial"] = {"u0": {"values": vals, "amplitude": 0.1}}
        cfg = build_config(doc)
        assert np.allclose(cfg.u0, 0.1 * np.asarray(vals))

    def test_values_length_mismatch(self):
        doc = base_doc()
        doc["initial"] = {"u0": {"values": [0.1, 0.2, 0.1]}}
        with pytest.raises(ConfigError, match="length 3"):
            build_config(doc)

    def test_values_cannot_ride_refinement(self):
        n = 50
        doc = base_doc()
        doc["initial"] = {"u0": {"values": [0.0] * n}}
        build_config(doc)  # level 0 is fine
        with pytest.raises(ConfigError, match="refinement ladder"):
            build_config(doc, refine_levels=1)

    def test_values_and_preset_conflict(self):
        doc = base_doc()
        doc["initial"] = {"u0": {"preset": "sine", "values": [0.0] * 50}}
        with pytest.raises(ConfigError, match="not both"):
            build_config(doc)

    def test_scale_of_u0(self):
        doc = variant(initial__u1__scale_of_u0=0.5)
        cfg = build_config(doc)
        assert np.allclose(cfg.u1, 0.5 * cfg.u0)

    def test_scale_of_u0_excludes_other_keys(self):
        doc = variant(initial__u1__scale_of_u0=0.5, initial__u1__amplitude=1.0)
        with pytest.raises(ConfigError, match="excludes"):
            build_config(doc)

    def test_incompatible_preset_rejected(self):
        with pytest.raises(ConfigError, match="boundary"):
            build_config(variant(initial__u0__preset="cosine"))


class TestBisectedAmplitude:
    def test_amplitude_resolves_to_zero_energy_root(self):
        doc = variant(initial__u0__amplitude="bisect_zero_energy",
                      initial__u1__scale_of_u0=0.5)
        doc["grid"]["n"] = 200
        cfg = build_config(doc)
        # grid-specific root, continuum value sqrt(16/3 (pi^2/2 - 1/8))
        assert np.max(cfg.u0) == pytest.approx(5.0648, abs=2e-3)
        assert np.allclose(cfg.u1, 0.5 * cfg.u0)

    def test_amplitude_factor_scales_the_root(self):
        kw = dict(initial__u0__amplitude="bisect_zero_energy",
                  initial__u1__scale_of_u0=0.5)
        plain = build_config(variant(**kw))
        inflated = build_config(variant(initial__u0__amplitude_factor=1.1, **kw))
        assert np.allclose(inflated.u0, 1.1 * plain.u0)

    def test_bisection_requires_velocity_ratio(self):
        doc = variant(initial__u0__amplitude="bisect_zero_energy")
        with pytest.raises(ConfigError, match="scale_of_u0"):
            build_config(doc)

    def test_bisection_refuses_nodal_values(self):
        doc = variant(initial__u0__amplitude="bisect_zero_energy",
                      initial__u1__scale_of_u0=0.5)
        doc["initial"]["u0"]["values"] = [0.0] * 50
        with pytest.raises(ConfigError, match="named preset"):
            build_config(doc)

    def test_other_string_amplitudes_rejected(self):
        with pytest.raises(ConfigError, match="amplitude must be a number"):
            build_config(variant(initial__u0__amplitude="huge"))


class TestRefinementLadder:
    def test_grid_and_dtau_halve_together(self):
        doc = variant(dtau=0.004)
        lvl0 = build_config(doc)
        lvl1 = build_config(doc, refine_levels=1)
        lvl2 = build_config(doc, refine_levels=2)
        assert (lvl0.grid.n, lvl1.grid.n, lvl2.grid.n) == (50, 101, 203)
        assert lvl1.grid.dx == pytest.approx(lvl0.grid.dx / 2, rel=1e-15)
        assert (lvl1.dtau, lvl2.dtau) == (0.002, 0.001)

    def test_auto_dtau_follows_the_grid(self):
        doc = base_doc()
        lvl1 = build_config(doc, refine_levels=1)
        assert lvl1.dtau == 0.5 * lvl1.grid.dx

    def test_negative_levels_rejected(self):
        with pytest.raises(ValueError):
            build_config(base_doc(), refine_levels=-1)


class TestFiles:
    def test_round_trip(self, tmp_path):
        path = tmp_path / "scenario.toml"
        path.write_text(
            'p = 3.0\ntau_max = 1.0\nform = "w_form"\n'
            "[grid]\nr1 = 0.0\nr2 = 1.0\nn = 50\n"
            '[kernel]\ntype = "expsum"\nterms = [[0.25, 1.0]]\n'
            "[initial.u0]\npreset = \"sine\"\namplitude = 0.05\n"
        )
        cfg = parse_config(path)
        assert cfg.p == 3.0
        assert cfg.grid.n == 50

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="cannot read"):
            parse_config(tmp_path / "nope.toml")

    def test_syntax_error_carries_location(self, tmp_path):
        path = tmp_path / "broken.toml"
        path.write_text("p = [unclosed\n")
        with pytest.raises(ConfigError, match="broken.toml"):
            load_document(path)
