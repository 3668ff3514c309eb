import csv
import io

import pytest

import satsplit


def rows(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_handshake_times():
    assert satsplit.handshake("vanilla")["duration_ms"] == 1620.0
    assert satsplit.handshake("keyless")["duration_ms"] == 580.0
    assert satsplit.handshake("dane-uncached")["duration_ms"] == 600.0
    hs = satsplit.handshake("dane-cached")
    assert hs["duration_ms"] == 80.0
    assert hs["satellite_round_trips"] == 0
    assert hs["flights"]


def test_handshake_scales_with_satellite_rtt():
    assert satsplit.handshake("vanilla", sat_rtt_ms=250)["duration_ms"] == 870.0


def test_page_load_cache_gain():
    for v in ("keyless", "dane-uncached", "dane-cached"):
        direct = satsplit.page_load(v, ece_cache=False)["total_ms"]
        cached = satsplit.page_load(v, ece_cache=True)["total_ms"]
        assert direct - cached == 520.0


def test_run_preset_csv():
    text = satsplit.run("fig4")
    assert text.splitlines()[0] == satsplit.CSV_HEADER
    by_variant = {r["variant"]: r for r in rows(text)}
    assert by_variant["dane-cached"]["handshake_ms"] == "80.000"
    assert satsplit.run("fig4") == text


def test_run_text_and_errors():
    out = rows(satsplit.run(text="preset = fig4\nsat_rtt_ms = 250\nvariants = vanilla\n"))
    assert [r["handshake_ms"] for r in out] == ["870.000"]
    with pytest.raises(satsplit.ConfigError, match="line 1"):
        satsplit.run(text="no_such_knob = 1\n")
    with pytest.raises(satsplit.UnknownKnob):
        satsplit.sweep("no_such_knob", ["1"])
    with pytest.raises(satsplit.ConfigError):
        satsplit.run("missing-preset")
    assert "sat_rtt_ms" in satsplit.knobs()


def test_sweep_labels():
    out = rows(satsplit.sweep("sat_rtt_ms", ["250", "500"]))
    assert {r["scenario"] for r in out} == {"fig4:sat_rtt_ms=250", "fig4:sat_rtt_ms=500"}


def test_ece_round_trip_and_rfc_vector():
    key = bytes(range(16))
    body = satsplit.ece_encrypt(b"hello" * 100, key, keyid=b"k1", rs=64)
    assert satsplit.ece_decrypt(body, key) == b"hello" * 100
    with pytest.raises(satsplit.AuthenticationFailure):
        satsplit.ece_decrypt(body, bytes(16))

    import base64

    def b64(s):
        return base64.urlsafe_b64decode(s + "=" * (-len(s) % 4))

    ikm = b64("yqdlZ-tYemfogSmv7Ws5PQ")
    wire = b64("I1BsxtFttlv3u_Oo94xnmwAAEAAA-NAVub2qFgBEuQKRapoZu-IxkIva3MEB1PD-ly8Thjg")
    assert satsplit.ece_decrypt(wire, ikm) == b"I am the walrus"
    salt = wire[:16]
    assert satsplit.ece_encrypt(b"I am the walrus", ikm, salt=salt) == wire
