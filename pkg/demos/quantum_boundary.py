"""Tsirelson point realized in dimension 4; the almost-quantum point passes
level 1+AB of the moment relaxation but is refuted at level 2."""
from exwb import quantum as q
from exwb.scenario import Scenario, catalog_get, chsh_value


def main():
    s, r = q.tsirelson_realization()
    b = q.behaviour_from_realization(r, s)
    print(f"Tsirelson realization: axioms ok {q.validate_realization(r, s).passed}, CHSH {chsh_value(b):.9f}")
    print(f"ideal (incl. coarse-grainings): {q.check_ideal(r, s).passed}")
    obj, const = q.chsh_objective()
    print(f"moment bound on CHSH (level 1): {q.npa_max_linear(Scenario.chsh(), obj, 1, const):.9f}")
    fit = q.seesaw_fit(s, catalog_get("tsirelson_chsh"), 4, budget=40, restarts=4)
    print(f"see-saw distance in d=4: {fit.distance:.2e}")
    aq = catalog_get("almost_quantum_chsh")
    for level in ("1+AB", 2):
        res = q.npa_infeasibility(aq.scenario, aq, level)
        extra = f", certificate verified {res.verify_certificate()}" if res.status == "infeasible" else ""
        print(f"almost-quantum point at level {level}: {res.status}{extra}")


if __name__ == "__main__":
    main()
