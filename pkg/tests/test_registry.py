import os
import signal
import subprocess
import sys
import threading
import time

import numpy as np
import pytest

from loadcast.errors import IntegrityError, NotFoundError
from loadcast.lstm import TrainConfig, init_parameters
from loadcast.record import ModelRecord, record_from_bytes
from loadcast.registry import ModelRegistry
from loadcast.series import PointId
from loadcast.windows import FEATURE_MODE_WEATHER, FeatureScaler, SplitSpec


def make_record(point="p", seed=0, metrics=None):
    params, head = init_parameters(seed, 6, 4, 3)
    scaler = FeatureScaler(
        means=(50.0, 1000.0, 15.0, 200.0, 40.0, 3.0, 900.0),
        stds=(10.0, 20.0, 8.0, 150.0, 25.0, 1.5, 250.0),
        fitted_start=0,
        fitted_end=3600 * 1000,
    )
    return ModelRecord(
        point=PointId(point),
        version=0,
        created_at=0,
        train_config=TrainConfig(epochs=2, seed=seed),
        split=SplitSpec(),
        scaler=scaler,
        params=params,
        head=head,
        metrics=metrics or {"overallMse": 123.456, "perStepMse": [1.0, 2.0, 3.0]},
        feature_mode=FEATURE_MODE_WEATHER,
    )


class TestSerialization:
    def test_bytes_roundtrip_bitwise(self):
        rec = make_record().stamped(version=3, created_at=1700000000)
        data = rec.to_bytes()
        back = record_from_bytes(data)
        assert back.to_bytes() == data
        assert back.point == rec.point
        assert back.version == 3
        assert back.created_at == 1700000000
        for a, b in zip(
            back.params.arrays() + back.head.arrays(),
            rec.params.arrays() + rec.head.arrays(),
        ):
            assert np.array_equal(a, b)

    def test_payload_excludes_version_and_time(self):
        rec = make_record(seed=1)
        assert (
            rec.stamped(1, 100).payload_bytes() == rec.stamped(9, 999).payload_bytes()
        )

    def test_payload_differs_across_seeds(self):
        assert make_record(seed=1).payload_bytes() != make_record(seed=2).payload_bytes()

    def test_every_flipped_byte_detected(self):
        data = bytearray(make_record().stamped(1, 1).to_bytes())
        rng = np.random.default_rng(0)
        for _ in range(25):
            pos = int(rng.integers(0, len(data)))
            original = data[pos]
            data[pos] ^= 0xFF
            with pytest.raises(IntegrityError):
                record_from_bytes(bytes(data))
            data[pos] = original

    def test_truncated_detected(self):
        data = make_record().stamped(1, 1).to_bytes()
        with pytest.raises(IntegrityError):
            record_from_bytes(data[: len(data) // 2])


class TestRegistry:
    def test_first_put_is_version_one(self, tmp_path):
        registry = ModelRegistry(tmp_path)
        assert registry.put(make_record(), now=10) == 1

    def test_sequential_versions(self, tmp_path):
        registry = ModelRegistry(tmp_path)
        versions = [registry.put(make_record(seed=s), now=s) for s in range(3)]
        assert versions == [1, 2, 3]

    def test_put_isolated_across_points(self, tmp_path):
        registry = ModelRegistry(tmp_path)
        registry.put(make_record("b", seed=5), now=1)
        before = registry.get_latest(PointId("b")).to_bytes()
        registry.put(make_record("a", seed=9), now=2)
        assert registry.get_latest(PointId("b")).to_bytes() == before

    def test_get_latest_roundtrip(self, tmp_path):
        registry = ModelRegistry(tmp_path)
        rec = make_record(seed=7)
        registry.put(rec, now=42)
        loaded = registry.get_latest(PointId("p"))
        assert loaded.version == 1
        assert loaded.payload_bytes() == rec.payload_bytes()

    def test_missing_version_not_found(self, tmp_path):
        registry = ModelRegistry(tmp_path)
        registry.put(make_record(), now=1)
        with pytest.raises(NotFoundError):
            registry.get_version(PointId("p"), 5)

    def test_unknown_point_not_found(self, tmp_path):
        with pytest.raises(NotFoundError):
            ModelRegistry(tmp_path).get_latest(PointId("ghost"))

    def test_corruption_is_integrity_not_notfound(self, tmp_path):
        registry = ModelRegistry(tmp_path)
        registry.put(make_record(), now=1)
        path = registry._version_path(PointId("p"), 1)
        data = bytearray(path.read_bytes())
        data[100] ^= 0x01
        path.write_bytes(bytes(data))
        with pytest.raises(IntegrityError):
            registry.get_version(PointId("p"), 1)

    def test_list_versions_sorted_with_metrics(self, tmp_path):
        registry = ModelRegistry(tmp_path)
        for s in range(3):
            registry.put(make_record(seed=s, metrics={"overallMse": 100.0 + s}), now=s)
        infos = registry.list_versions(PointId("p"))
        assert [i.version for i in infos] == [1, 2, 3]
        assert infos[2].headline_mse == pytest.approx(102.0)

    def test_prune_keeps_newest(self, tmp_path):
        registry = ModelRegistry(tmp_path)
        for s in range(5):
            registry.put(make_record(seed=s), now=s)
        removed = registry.prune(PointId("p"), keep=2)
        assert removed == [1, 2, 3]
        assert [i.version for i in registry.list_versions(PointId("p"))] == [4, 5]

    def test_unsafe_point_id_stored(self, tmp_path):
        registry = ModelRegistry(tmp_path)
        registry.put(make_record("weird/id with spaces"), now=1)
        rec = registry.get_latest(PointId("weird/id with spaces"))
        assert rec.point.id == "weird/id with spaces"


class TestConcurrency:
    def test_same_point_serializes(self, tmp_path):
        registry = ModelRegistry(tmp_path)
        record = make_record()
        errors = []

        def writer():
            try:
                for _ in range(5):
                    registry.put(record, now=1)
            except Exception as e:  # pragma: no cover
                errors.append(e)

        threads = [threading.Thread(target=writer) for _ in range(8)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert not errors
        versions = [i.version for i in registry.list_versions(PointId("p"))]
        assert versions == list(range(1, 41))

    def test_different_points_parallel_clean(self, tmp_path):
        registry = ModelRegistry(tmp_path)
        errors = []

        def writer(name):
            try:
                rec = make_record(name, seed=hash(name) % 100)
                for _ in range(4):
                    registry.put(rec, now=2)
            except Exception as e:  # pragma: no cover
                errors.append(e)

        threads = [threading.Thread(target=writer, args=(f"pt-{i}",)) for i in range(6)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert not errors
        for i in range(6):
            infos = registry.list_versions(PointId(f"pt-{i}"))
            assert [v.version for v in infos] == [1, 2, 3, 4]
            registry.get_latest(PointId(f"pt-{i}"))  # loads clean


KILLER_SCRIPT = """
import sys
from tests.test_registry import make_record
from loadcast.registry import ModelRegistry

registry = ModelRegistry(sys.argv[1])
record = make_record(seed=3)
for _ in range(10000):
    registry.put(record, now=7)
"""


class TestCrashSafety:
    @pytest.mark.parametrize("trial", range(10))
    def test_kill_during_write_never_corrupts(self, tmp_path, trial):
        proc = subprocess.Popen(
            [sys.executable, "-c", KILLER_SCRIPT, str(tmp_path)],
            cwd=os.path.dirname(os.path.dirname(os.path.abspath(__file__))),
            stdout=subprocess.DEVNULL,
            stderr=subprocess.DEVNULL,
        )
        time.sleep(0.25 + trial * 0.05)
        proc.send_signal(signal.SIGKILL)
        proc.wait()
        registry = ModelRegistry(tmp_path)
        versions = [i.version for i in registry.list_versions(PointId("p"))]
        assert versions == list(range(1, len(versions) + 1))  # contiguous
        if versions:
            registry.get_latest(PointId("p"))  # readable, checksum passes
