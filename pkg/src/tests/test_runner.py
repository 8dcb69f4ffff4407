from dataclasses import replace
from unittest import TestCase

from thinfilm.config import RunConfig, SweepSpec, parse_config
from thinfilm.exceptions import ConfigError
from thinfilm.runner import prepare, sweep_members


class TestRunner(TestCase):

    def setUp(self):
        self.cfg = parse_config("grid.n = 16\nflow.t_final = 1e-3\nflow.n_steps = 4\noutput.dir = out")

    def test_prepare(self):
        setup = prepare(self.cfg)
        self.assertEqual(setup.grid.n, 16)
        self.assertTrue(setup.u0.mean_zero)
        self.assertFalse(setup.policy.truncated)
        self.assertEqual(setup.prox.tau, 2.5e-4)
        self.assertFalse(setup.flow.keep_states)
        auto = prepare(replace(self.cfg, flow=replace(self.cfg.flow, truncation="auto")))
        self.assertEqual(auto.policy.level_N, 10.0)
        fixed = prepare(replace(self.cfg, flow=replace(self.cfg.flow, truncation=3.0)), keep_states=True)
        self.assertEqual(fixed.policy.level_N, 3.0)
        self.assertTrue(fixed.flow.keep_states)

    def test_sweep_members(self):
        cases = {
            "tau": ((1e-4, 5e-4), lambda m: m.flow.n_steps, [10, 2]),
            "n": ((8, 32), lambda m: m.grid.n, [8, 32]),
            "amplitude": ((1e-3, 2e-3), lambda m: m.ic.amplitude, [1e-3, 2e-3]),
            "N": ((5.0, 50.0), lambda m: m.flow.truncation, [5.0, 50.0]),
        }
        for axis, (values, read, expected) in cases.items():
            with self.subTest(axis=axis):
                cfg = replace(self.cfg, sweep=SweepSpec(axis, values))
                members = sweep_members(cfg)
                self.assertEqual([read(m) for _, m in members], expected)
                self.assertEqual(members[0][1].output.directory, "out/{}_{:g}".format(axis, values[0]))

    def test_sweep_needs_axis(self):
        with self.assertRaises(ConfigError):
            sweep_members(RunConfig())
