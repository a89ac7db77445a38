"""Back-of-envelope capacity model for a shared-pool deployment.

Every client scans every header, so server egress grows with the square of
the user count: the pool accumulates ``users * rate`` headers a day and each
of the ``users`` clients downloads all of them.  Bodies and attachments are
fetched only by their actual recipient and do not contribute to the scan
cost.  Syncs-per-day scales only the egress upper bound — a client's cursor
means it downloads each header once no matter how often it polls, but every
sync may re-fetch the day's page list in the worst case.
"""

from __future__ import annotations

from dataclasses import dataclass

from .header import HEADER_CT_SIZE


@dataclass(frozen=True)
class LoadParams:
    users: int
    messages_per_user_per_day: int
    header_ct_size: int = HEADER_CT_SIZE
    syncs_per_user_per_day: int = 1

    def __post_init__(self) -> None:
        for name in (
            "users",
            "messages_per_user_per_day",
            "header_ct_size",
            "syncs_per_user_per_day",
        ):
            value = getattr(self, name)
            if value <= 0:
                raise ValueError(f"{name} must be positive, got {value}")


@dataclass(frozen=True)
class LoadEstimate:
    daily_new_header_bytes: int
    per_client_daily_decrypt_bytes: int
    server_daily_egress_bytes: int
    trial_decryptions_per_client_per_day: int


def estimate(params: LoadParams) -> LoadEstimate:
    """Daily header-scan load; exact products, no rounding."""
    daily_headers = params.users * params.messages_per_user_per_day
    daily_new = daily_headers * params.header_ct_size
    return LoadEstimate(
        daily_new_header_bytes=daily_new,
        per_client_daily_decrypt_bytes=daily_new,
        server_daily_egress_bytes=daily_new * params.users * params.syncs_per_user_per_day,
        trial_decryptions_per_client_per_day=daily_headers,
    )
