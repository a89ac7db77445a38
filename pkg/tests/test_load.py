"""Capacity-model arithmetic, pinned to the published estimates."""

import pytest
from hypothesis import given
from hypothesis import strategies as st

from warp2.header import HEADER_CT_SIZE
from warp2.load import LoadEstimate, LoadParams, estimate


def test_published_scale_estimates():
    # the canonical sizing example: a thousand users, ten messages each,
    # kilobyte headers, one sync a day
    est = estimate(
        LoadParams(
            users=1000,
            messages_per_user_per_day=10,
            header_ct_size=1000,
            syncs_per_user_per_day=1,
        )
    )
    assert est.per_client_daily_decrypt_bytes == 10_000_000  # ~10 MB/client/day
    assert est.server_daily_egress_bytes == 10_000_000_000  # ~10 GB/day
    assert est.daily_new_header_bytes == 10_000_000
    assert est.trial_decryptions_per_client_per_day == 10_000


def test_unit_case():
    est = estimate(
        LoadParams(users=1, messages_per_user_per_day=1, header_ct_size=1)
    )
    assert est == LoadEstimate(1, 1, 1, 1)


def test_default_header_size_matches_wire_format():
    est = estimate(LoadParams(users=2, messages_per_user_per_day=3))
    assert est.daily_new_header_bytes == 2 * 3 * HEADER_CT_SIZE


def test_doubling_users_quadruples_egress():
    base = LoadParams(users=500, messages_per_user_per_day=8, header_ct_size=560)
    doubled = LoadParams(users=1000, messages_per_user_per_day=8, header_ct_size=560)
    a, b = estimate(base), estimate(doubled)
    assert b.server_daily_egress_bytes == 4 * a.server_daily_egress_bytes
    assert b.per_client_daily_decrypt_bytes == 2 * a.per_client_daily_decrypt_bytes


@pytest.mark.parametrize("field", ["users", "messages_per_user_per_day", "header_ct_size", "syncs_per_user_per_day"])
@pytest.mark.parametrize("bad", [0, -1])
def test_non_positive_parameters_rejected(field, bad):
    kwargs = dict(users=10, messages_per_user_per_day=10, header_ct_size=560, syncs_per_user_per_day=1)
    kwargs[field] = bad
    with pytest.raises(ValueError, match=field):
        LoadParams(**kwargs)


positive = st.integers(min_value=1, max_value=10**6)


@given(users=positive, rate=positive, size=positive, syncs=st.integers(min_value=1, max_value=96))
def test_scaling_laws(users, rate, size, syncs):
    p = LoadParams(users, rate, size, syncs)
    est = estimate(p)

    # linear in header size and message rate
    assert estimate(LoadParams(users, rate, size * 3, syncs)).per_client_daily_decrypt_bytes \
        == 3 * est.per_client_daily_decrypt_bytes
    assert estimate(LoadParams(users, rate * 5, size, syncs)).server_daily_egress_bytes \
        == 5 * est.server_daily_egress_bytes

    # quadratic in users for egress, linear for the per-client cost
    grown = estimate(LoadParams(users * 7, rate, size, syncs))
    assert grown.server_daily_egress_bytes == 49 * est.server_daily_egress_bytes
    assert grown.per_client_daily_decrypt_bytes == 7 * est.per_client_daily_decrypt_bytes

    # internal consistency
    assert est.per_client_daily_decrypt_bytes == est.daily_new_header_bytes
    assert est.server_daily_egress_bytes == est.daily_new_header_bytes * users * syncs
    assert est.trial_decryptions_per_client_per_day * size == est.daily_new_header_bytes
