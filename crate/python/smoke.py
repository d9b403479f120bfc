"""Smoke test for the conav extension module.

Build and install first: pip install maturin; maturin develop --release -m crates/py/Cargo.toml
"""

import conav


def main():
    s = conav.Scenario.builtin("basic")
    assert conav.Scenario.parse(s.to_text()).to_text() == s.to_text()
    print(s, s.robot_start, s.comm_vocab)

    ep = conav.run_episode(s, seed=0)
    rep = ep.report
    print(rep)
    assert rep.outcome == "GOAL"
    assert len(ep.robot_path()) == rep.steps
    assert ep.log_text().startswith("# conav-log v1")

    base = conav.run_episode(s, seed=0, baseline=True)
    assert base.report.sensor_queries == 0
    assert set(base.signals()) == {"null"}

    v, w = conav.safe_control((0.0, 0.0, 0.0), (1.0, 0.0), (1.6, 0.0))
    assert conav.barrier((v * 0.1, 0.0, 0.0), (1.6, 0.0)) > 0.0
    print("safe control", v, w)

    vocab = ["null", "north", "south", "east", "west"]
    post = conav.update_belief(0, "north", vocab)
    assert post == 0b111000000 or post == 0b000000111, bin(post)
    assert conav.update_belief(0, "null", vocab) == 0b111111111
    print("belief", format(post, "09b"))

    reports = conav.run_batch([s], seeds=[0, 1], include_baseline=False)
    assert len(reports) == 2
    print("smoke ok")


if __name__ == "__main__":
    main()
