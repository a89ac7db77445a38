"""Inbox store: idempotent uploads, paging, purge lifecycle, persistence."""

import os
import random
import threading
from datetime import datetime, timezone

import pytest

from warp2 import crypto
from warp2.header import compose_envelope
from warp2.inbox import (
    InboxStore,
    MalformedEnvelope,
    NoAttachment,
    NotFound,
    OversizeBlob,
)

DATE = datetime(2026, 3, 1, 12, 0, 0, tzinfo=timezone.utc)


@pytest.fixture
def kp():
    return crypto.generate_keypair()


@pytest.fixture
def store(tmp_path):
    s = InboxStore(tmp_path / "inbox")
    yield s
    s.close()


def envelope(kp, body=b"body bytes", attachment=None, subject="s"):
    env, receipt = compose_envelope(
        "alice", "bob", subject, DATE, body, attachment, kp.public_part
    )
    return env, receipt


def upload(store, env):
    return store.upload(env.header_ct, env.body_ct, env.attachment_ct, env.receipt_lock)


class TestUpload:
    def test_header_id_is_hash_of_header_ct(self, store, kp):
        env, _ = envelope(kp)
        header_id, seq = upload(store, env)
        assert header_id == crypto.sha256(env.header_ct)
        assert len(header_id.hex()) == 64
        assert seq >= 1

    def test_idempotent_reupload(self, store, kp):
        env, _ = envelope(kp)
        first = upload(store, env)
        second = upload(store, env)
        assert first == second
        assert store.stats().live == 1

    def test_seq_strictly_increasing(self, store, kp):
        seqs = [upload(store, envelope(kp)[0])[1] for _ in range(5)]
        assert seqs == sorted(seqs) and len(set(seqs)) == 5

    def test_oversize_body_rejected(self, tmp_path, kp):
        small = InboxStore(tmp_path / "small", blob_limit=1024)
        env, _ = envelope(kp, body=b"x" * 2048)
        with pytest.raises(OversizeBlob):
            upload(small, env)
        assert small.stats().live == 0
        small.close()

    def test_wrong_header_ct_size_rejected(self, store, kp):
        env, _ = envelope(kp)
        with pytest.raises(MalformedEnvelope):
            store.upload(env.header_ct[:-1], env.body_ct, None, env.receipt_lock)

    def test_bad_receipt_lock_rejected(self, store, kp):
        env, _ = envelope(kp)
        with pytest.raises(MalformedEnvelope):
            store.upload(env.header_ct, env.body_ct, None, b"short")

    def test_empty_body_rejected(self, store, kp):
        env, _ = envelope(kp)
        with pytest.raises(MalformedEnvelope):
            store.upload(env.header_ct, b"", None, env.receipt_lock)


class TestListing:
    def test_fresh_store_lists_nothing(self, store):
        page = store.list_headers(after=0)
        assert page.entries == [] and page.next_cursor == 0

    def test_three_records(self, store, kp):
        ids = [upload(store, envelope(kp)[0])[0] for _ in range(3)]
        page = store.list_headers(after=0)
        assert [e.header_id for e in page.entries] == ids
        assert page.next_cursor == page.entries[-1].seq

    def test_after_highest_seq_is_empty(self, store, kp):
        upload(store, envelope(kp)[0])
        top = store.list_headers(after=0).next_cursor
        page = store.list_headers(after=top)
        assert page.entries == [] and page.next_cursor == top

    def test_paging_against_reference_model(self, tmp_path, kp):
        # Brute enumeration oracle: a plain list of (seq, header_id) in upload
        # order must equal the concatenation of cursor-chained pages.
        store = InboxStore(tmp_path / "paged", page_limit=40)
        reference = []
        for i in range(100):
            env, _ = envelope(kp, body=f"msg {i}".encode())
            header_id, seq = upload(store, env)
            reference.append((seq, header_id))

        collected = []
        cursor = 0
        sizes = []
        while True:
            page = store.list_headers(after=cursor)
            if not page.entries:
                break
            sizes.append(len(page.entries))
            collected.extend((e.seq, e.header_id) for e in page.entries)
            assert all(e.seq > cursor for e in page.entries)
            cursor = page.next_cursor
        assert sizes == [40, 40, 20]
        assert collected == reference
        store.close()

    def test_limit_capped_by_page_limit(self, tmp_path, kp):
        store = InboxStore(tmp_path / "cap", page_limit=10)
        for i in range(15):
            upload(store, envelope(kp, body=f"{i}".encode())[0])
        assert len(store.list_headers(after=0, limit=500).entries) == 10
        assert len(store.list_headers(after=0, limit=3).entries) == 3
        store.close()


class TestFetch:
    def test_fetch_body_byte_identical(self, store, kp):
        env, _ = envelope(kp, body=b"the body", attachment=b"the attachment")
        header_id, _ = upload(store, env)
        assert store.fetch_blob("body", header_id) == env.body_ct
        assert store.fetch_blob("attachment", header_id) == env.attachment_ct

    def test_fetch_missing_attachment(self, store, kp):
        env, _ = envelope(kp)
        header_id, _ = upload(store, env)
        with pytest.raises(NoAttachment):
            store.fetch_blob("attachment", header_id)

    def test_fetch_unknown_id(self, store):
        with pytest.raises(NotFound):
            store.fetch_blob("body", bytes(32))

    def test_fetch_after_purge(self, store, kp):
        env, receipt = envelope(kp)
        header_id, _ = upload(store, env)
        assert store.acknowledge(receipt.preimage) is True
        with pytest.raises(NotFound):
            store.fetch_blob("body", header_id)


class TestAcknowledge:
    def test_correct_preimage_purges(self, store, kp):
        env, receipt = envelope(kp)
        header_id, _ = upload(store, env)
        assert store.acknowledge(receipt.preimage) is True
        assert all(e.header_id != header_id for e in store.list_headers(0).entries)

    def test_random_bytes_do_nothing(self, store, kp):
        upload(store, envelope(kp)[0])
        before = store.stats()
        assert store.acknowledge(os.urandom(32)) is False
        assert store.stats() == before

    def test_replay_of_server_visible_values_never_purges(self, store, kp):
        # Vandal model: everything a scraper can see (header ids, receipt
        # locks, blob hashes) replayed as receipts must purge nothing.
        receipts = []
        for i in range(10):
            env, receipt = envelope(kp, body=f"v{i}".encode(), attachment=b"a")
            upload(store, env)
            receipts.append(receipt)
        visible = set()
        for e in store.list_headers(0).entries:
            visible.add(e.header_id)
            visible.add(crypto.sha256(e.header_ct))
        cur = store._db.execute("SELECT receipt_lock, body_hash, attachment_hash FROM records")
        for lock, body_hash, att_hash in cur.fetchall():
            visible.add(bytes.fromhex(lock))
            visible.add(bytes.fromhex(body_hash))
            if att_hash:
                visible.add(bytes.fromhex(att_hash))
        for value in visible:
            assert store.acknowledge(value) is False
        assert store.stats().live == 10
        # The genuine preimage still works in one call.
        assert store.acknowledge(receipts[0].preimage) is True

    def test_double_acknowledge_is_stable(self, store, kp):
        env, receipt = envelope(kp)
        upload(store, env)
        assert store.acknowledge(receipt.preimage) is True
        for _ in range(3):
            assert store.acknowledge(receipt.preimage) is False
        assert store.stats().purged == 1

    def test_purge_deletes_blob_files(self, store, kp):
        env, receipt = envelope(kp, attachment=b"att")
        upload(store, env)
        assert len(list(store.blob_dir.iterdir())) == 2
        store.acknowledge(receipt.preimage)
        assert list(store.blob_dir.iterdir()) == []

    def test_purged_envelope_reupload_stays_purged(self, store, kp):
        env, receipt = envelope(kp)
        first = upload(store, env)
        store.acknowledge(receipt.preimage)
        assert upload(store, env) == first
        assert store.stats().live == 0 and store.stats().purged == 1


class TestStatsAndCompact:
    def test_fresh_server(self, store):
        s = store.stats()
        assert (s.live, s.purged, s.total_bytes) == (0, 0, 0)

    def test_counts_after_uploads_and_acks(self, store, kp):
        receipts = []
        for i in range(10):
            env, receipt = envelope(kp, body=f"m{i}".encode())
            upload(store, env)
            receipts.append(receipt)
        assert store.stats().live == 10
        for receipt in receipts[:4]:
            store.acknowledge(receipt.preimage)
        s = store.stats()
        assert (s.live, s.purged) == (6, 4)

    def test_total_bytes_matches_stored_sizes(self, store, kp):
        env, _ = envelope(kp, body=b"b" * 100, attachment=b"a" * 50)
        upload(store, env)
        expected = len(env.header_ct) + len(env.body_ct) + len(env.attachment_ct)
        assert store.stats().total_bytes == expected

    def test_compact_removes_old_tombstones(self, store, kp):
        env, receipt = envelope(kp)
        upload(store, env)
        store.acknowledge(receipt.preimage)
        assert store.compact(retention_seconds=3600) == 0
        assert store.compact(retention_seconds=-1) == 1
        assert store.stats().purged == 0


class TestPersistence:
    def test_reopen_preserves_records_and_cursors(self, tmp_path, kp):
        path = tmp_path / "persist"
        store = InboxStore(path)
        envs = [envelope(kp, body=f"p{i}".encode()) for i in range(4)]
        ids = [upload(store, env)[0] for env, _ in envs]
        store.acknowledge(envs[0][1].preimage)
        store.close()

        reopened = InboxStore(path)
        page = reopened.list_headers(0)
        assert [e.header_id for e in page.entries] == ids[1:]
        assert reopened.fetch_blob("body", ids[1]) == envs[1][0].body_ct
        # Seq continues from where it left off, never reused.
        new_id, new_seq = upload(reopened, envelope(kp, body=b"after reopen")[0])
        assert new_seq > page.next_cursor
        reopened.close()


class TestConcurrency:
    def test_parallel_uploads_have_unique_seqs(self, store, kp):
        envs = [envelope(kp, body=f"c{i}".encode())[0] for i in range(30)]
        results = []
        errors = []

        def worker(env):
            try:
                results.append(upload(store, env))
            except Exception as exc:  # pragma: no cover
                errors.append(exc)

        threads = [threading.Thread(target=worker, args=(e,)) for e in envs]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert not errors
        seqs = [seq for _, seq in results]
        assert len(set(seqs)) == 30
        assert store.stats().live == 30

    def test_concurrent_ack_and_list(self, store, kp):
        pairs = [envelope(kp, body=f"x{i}".encode()) for i in range(20)]
        for env, _ in pairs:
            upload(store, env)

        def acker():
            for _, receipt in pairs:
                store.acknowledge(receipt.preimage)

        seen_counts = []

        def lister():
            for _ in range(50):
                seen_counts.append(len(store.list_headers(0).entries))

        t1, t2 = threading.Thread(target=acker), threading.Thread(target=lister)
        t1.start(), t2.start()
        t1.join(), t2.join()
        assert store.stats().live == 0
        # Listing only ever saw monotonically shrinking live sets, no torn rows.
        assert all(0 <= c <= 20 for c in seen_counts)
