"""Single-copy versus two-copy exclusivity for the catalog behaviours."""
from exwb import exgraph as eg
from exwb import polytope as pt
from exwb.scenario import catalog_get


def main():
    for name in ("specker_triangle", "wright_pentagon", "pr_box", "tsirelson_chsh"):
        b = catalog_get(name)
        g = eg.exclusivity_graph(b.scenario)
        w = eg.behaviour_to_weights(b, g)
        one = pt.satisfies_ep(g, w, 1, exact=True)
        two = pt.satisfies_ep(g, w, 2, exact=True)
        print(f"{name:18s} n={g.n:3d}  max clique weight: 1 copy {one.value:.4f}, 2 copies {two.value:.4f}"
              f"  -> {'violates' if not two.member else 'satisfies'} two-copy EP")
        if not two.member:
            assert pt.verify_ep_violation(g, w, two.certificate)


if __name__ == "__main__":
    main()
