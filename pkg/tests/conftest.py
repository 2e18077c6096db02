import functools

import pytest

from glvort import fields as fl
from glvort import obstacle as ob
from glvort import radial as rd

R_STAR = 1.5  # inner radius used for annulus fixtures; r = 1 has no match


@functools.lru_cache(maxsize=None)
def matched():
    return rd.match_annulus(R_STAR)


@functools.lru_cache(maxsize=None)
def slab(n):
    return rd.slab_field(fl.GridSpec.square(1.0, n))


@functools.lru_cache(maxsize=None)
def annulus(n):
    m = matched()
    return rd.annulus_field(m, rd.annulus_grid(m, n))


@functools.lru_cache(maxsize=None)
def disk_solution(n):
    return rd.disk_solution_field(fl.GridSpec.square(1.0, n))


@functools.lru_cache(maxsize=None)
def multiline(k, n):
    return rd.multiline_field(k, fl.GridSpec.square(1.0, n))


@functools.lru_cache(maxsize=None)
def obstacle(lam, n):
    return ob.solve_obstacle(ob.disk_problem(lam, n))


@functools.lru_cache(maxsize=None)
def extracted(name, n):
    from glvort.measure import extract_measure
    f = {"slab": slab, "annulus": annulus}[name](n)
    return extract_measure(f)


@pytest.fixture(scope="session")
def fixtures():
    return {"matched": matched, "slab": slab, "annulus": annulus, "disk": disk_solution,
            "multiline": multiline, "obstacle": obstacle, "extracted": extracted}


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance")
    if mod is None or not getattr(mod, "RESULTS", None):
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(mod.RESULTS, key=lambda s: int(s.split()[0][2:])):
        terminalreporter.write_line(line)
