"""Smoke test for the eesmr_lab Python bindings."""

import eesmr_lab as el


def main():
    sc = el.Scenario.ring(7, seed=3)
    assert sc.n == 7 and sc.f == 3
    sc.validate()
    rep = el.run(sc)
    assert rep.passed, rep.verdicts
    assert min(rep.committed) > 0
    ble = rep.energy_mj("ble")
    assert len(ble) == 7 and all(e > 0 for e in ble)
    assert "safety" in rep.verdicts

    faulty = sc.with_overrides(["adversary.profile=equivocator"])
    assert el.run(faulty).passed

    try:
        sc.with_overrides(["f=5"]).validate()
    except ValueError:
        pass
    else:
        raise AssertionError("f=5 with n=7 should be rejected")

    g = el.Hypergraph.ring(7, 3)
    ok, witness = g.certify(2)
    assert ok and witness is None
    assert g.f_nec() == 2
    assert el.Hypergraph.ring(7, 1).certify(1)[0] is False

    b, w, v = el.psi("eesmr", 13, k=7)
    assert abs(w - (b + v)) < 1e-9
    sb, _, sv = el.psi("synchs", 13, k=7)
    assert 2.0 <= sb / b <= 4.0
    assert el.f_e_bound(1.0, 1.0, 10.0) == 4
    assert abs(el.nu_f_bound(1.0, 3.0, 2.0, 0.0) - 1 / 3) < 1e-12
    print("python smoke test ok")


if __name__ == "__main__":
    main()
