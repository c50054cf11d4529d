from porophase.verification import (spatial_order_stationary,
                                    temporal_order_coupled,
                                    temporal_order_decoupled)


def test_backward_euler_is_first_order():
    scan = temporal_order_decoupled(theta=1.0)
    assert 0.9 <= scan.observed_order <= 1.1


def test_midpoint_scheme_is_second_order():
    scan = temporal_order_decoupled(theta=0.5)
    assert 1.8 <= scan.observed_order <= 2.2


def test_stationary_residual_is_second_order():
    scan = spatial_order_stationary()
    assert 1.8 <= scan.observed_order <= 2.2


def test_coupled_scheme_is_first_order_for_any_theta():
    for theta in (1.0, 0.5):
        scan = temporal_order_coupled(theta=theta)
        assert 0.7 <= scan.observed_order <= 1.3
