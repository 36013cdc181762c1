import pytest
from hypothesis import given, strategies as st

from tsnsynth.errors import InfeasibleError
from tsnsynth.tesla import (auth_interval, divisors_desc, earliest_auth_time,
                            optimize_p_int)


class TestOptimizePInt:
    def test_motivational_example_value(self):
        assert optimize_p_int([("app1", 1000, 1)], 1000) == 500

    def test_no_secure_chain_allows_full_period(self):
        assert optimize_p_int([("app1", 1000, 0)], 1000) == 1000

    def test_two_apps_gcd_bound(self):
        got = optimize_p_int([("a", 10000, 1), ("b", 15000, 1)], 30000)
        assert got == 5000

    def test_infeasible_names_the_app(self):
        # depth 999 cannot fit into the period with integral intervals
        with pytest.raises(InfeasibleError) as err:
            optimize_p_int([("deep", 10, 999)], 10)
        assert "deep" in err.value.subjects

    def test_result_is_maximal(self):
        apps = [("a", 10000, 1), ("b", 15000, 1), ("c", 20000, 0)]
        h = 60000
        p = optimize_p_int(apps, h)

        def admissible(q):
            import math
            g = math.gcd(10000, 15000, 20000)
            return (all(q * (c + 1) <= t for _, t, c in apps)
                    and h % q == 0 and (q % g == 0 or g % q == 0))

        assert admissible(p)
        assert not any(admissible(q) for q in divisors_desc(h) if q > p)

    def test_doubling_breaks_a_constraint(self):
        p = optimize_p_int([("app1", 1000, 1)], 1000)
        assert p * 2 * (1 + 1) > 1000  # P1 violated at 2*P_int


class TestAuthInterval:
    def test_mid_interval(self):
        assert auth_interval(120, 500) == 1

    def test_boundary_counts_as_next_interval(self):
        assert auth_interval(500, 500) == 2

    def test_zero(self):
        assert auth_interval(0, 500) == 1

    @given(st.integers(0, 10 ** 6), st.integers(1, 10 ** 4))
    def test_strictly_after_arrival_interval(self, a, p):
        phi = auth_interval(a, p)
        assert phi > a // p
        assert phi - 1 <= a // p  # minimality

    @given(st.integers(0, 10 ** 5), st.integers(0, 10 ** 5), st.integers(1, 10 ** 4))
    def test_monotone_in_arrival(self, a1, a2, p):
        lo, hi = sorted((a1, a2))
        assert auth_interval(lo, p) <= auth_interval(hi, p)


class TestEarliestAuthTime:
    def test_arithmetic(self):
        assert earliest_auth_time(1, 500, 30) == 530

    def test_example_consumption_only_in_second_interval(self):
        # arrival ends inside interval 0 -> authentication in interval 1,
        # i.e. not before the 500 us boundary
        phi = auth_interval(216, 500)
        assert phi == 1
        assert earliest_auth_time(phi, 500, 41) == 541 > 500
