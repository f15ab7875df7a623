"""Synthetic UNSW-NB15 / KDD Cup 1999 style CSV rows for tests and offline demos.

Rows follow the raw column layouts of :mod:`idsfusion.ingest` exactly (dashes,
blank cells, hex ports and the KDD trailing-period labels included). Traffic
profiles are coarse imitations of the published datasets' dominant record
types: benign flows from internal hosts with TTL 31/29, attack flows from the
attacker subnet with TTL 254/62 in UNSW; normal sessions, smurf, neptune and a
tail of rarer attacks in KDD. The numbers are plausible, not measured.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .ingest import KDD_COLUMNS, KDD_SCHEMA, UNSW_COLUMNS, UNSW_SCHEMA, RawTable, write_csv

UNSW_MALICIOUS_FRACTION = 0.032
KDD_MALICIOUS_FRACTION = 0.803

_STIME0 = 1421927414


def _num(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{float(v):.6g}"


def _rate(v) -> str:
    return f"{min(max(v, 0.0), 1.0):.2f}"


def _ip(prefix: str, rng, lo: int, hi: int) -> str:
    return f"{prefix}.{int(rng.integers(lo, hi + 1))}"


# ---------------------------------------------------------------------------
# UNSW-NB15
# ---------------------------------------------------------------------------

def _unsw_row(rng, malicious: bool) -> list[str]:
    r = dict.fromkeys(UNSW_COLUMNS, "0")
    stime = _STIME0 + int(rng.integers(0, 86_400))
    if not malicious:
        kind = rng.choice(["dns", "tcp"], p=[0.45, 0.55])
        r["srcip"] = _ip("59.166.0", rng, 0, 9)
        r["dstip"] = _ip("149.171.126", rng, 0, 9)
        sttl, dttl = 31, 29
        if rng.random() < 0.01:
            sttl, dttl = 62, 252
        attack_cat = ""
    else:
        kind = rng.choice(["generic", "exploit", "fuzz", "recon"], p=[0.5, 0.25, 0.15, 0.10])
        r["srcip"] = _ip("175.45.176", rng, 0, 3)
        r["dstip"] = _ip("149.171.126", rng, 10, 19)
        sttl, dttl = (254, 252) if kind != "exploit" else (62, 252)
        # a few attacks reuse benign TTLs and only differ in host and rate features
        if rng.random() < 0.03:
            sttl, dttl = 31, 29
        attack_cat = {"generic": "Generic", "exploit": "Exploits",
                      "fuzz": "Fuzzers", "recon": "Reconnaissance"}[kind]

    sport = int(rng.integers(1024, 65536))
    if kind in ("dns", "generic"):
        proto, state, service = "udp", "CON" if kind == "dns" else "INT", "dns"
        dsport = 53
        spkts, dpkts = 2, (2 if kind == "dns" else 0)
        sbytes = int(rng.integers(130, 147)) if kind == "dns" else 114
        dbytes = int(rng.integers(162, 179)) if kind == "dns" else 0
        dur = rng.uniform(0.0005, 0.003) if kind == "dns" else rng.uniform(0.0, 0.00001)
        swin = dwin = 0
        stcpb = dtcpb = 0
        tcprtt = synack = ackdat = 0.0
    else:
        proto = "tcp"
        if kind == "fuzz" and rng.random() < 0.4:
            proto = "udp"
        state = "FIN" if kind in ("tcp", "exploit") else "INT"
        if kind == "tcp":
            service = rng.choice(["http", "-", "ftp-data", "smtp", "ftp", "ssh", "pop3", "irc"],
                                 p=[0.30, 0.30, 0.12, 0.10, 0.07, 0.07, 0.03, 0.01])
        elif kind == "exploit":
            service = rng.choice(["http", "-", "smtp", "ftp"], p=[0.5, 0.3, 0.1, 0.1])
        else:
            service = rng.choice(["-", "http"], p=[0.8, 0.2])
        dsport = {"http": 80, "ftp-data": 20, "smtp": 25, "ftp": 21, "ssh": 22,
                  "pop3": 110, "irc": 6667}.get(service, int(rng.integers(1, 65536)))
        spkts = int(rng.integers(4, 120))
        dpkts = int(rng.integers(2, 150)) if state == "FIN" else 0
        sbytes = int(spkts * rng.uniform(55, 900))
        dbytes = int(dpkts * rng.uniform(60, 1400))
        dur = rng.lognormal(-1.0, 1.5)
        swin = dwin = 255 if state == "FIN" else 0
        stcpb = int(rng.integers(0, 2**32)) if swin else 0
        dtcpb = int(rng.integers(0, 2**32)) if dwin else 0
        synack = rng.uniform(0.00005, 0.0008) if state == "FIN" else 0.0
        ackdat = rng.uniform(0.00005, 0.0008) if state == "FIN" else 0.0
        tcprtt = synack + ackdat
        if proto == "udp":
            swin = dwin = stcpb = dtcpb = 0
            tcprtt = synack = ackdat = 0.0

    r.update(
        proto=proto, state=state, service=service,
        sport=(f"0x{sport:04x}" if rng.random() < 0.002 else str(sport)),
        dsport=str(dsport),
        dur=_num(dur), sbytes=_num(sbytes), dbytes=_num(dbytes),
        sttl=_num(sttl), dttl=_num(dttl if dpkts or not malicious else 0),
        sloss=_num(int(rng.integers(0, 3)) if spkts > 20 else 0),
        dloss=_num(int(rng.integers(0, 3)) if dpkts > 20 else 0),
        Sload=_num(sbytes * 8 / max(dur, 1e-6)), Dload=_num(dbytes * 8 / max(dur, 1e-6)),
        Spkts=_num(spkts), Dpkts=_num(dpkts),
        swin=_num(swin), dwin=_num(dwin), stcpb=_num(stcpb), dtcpb=_num(dtcpb),
        smeansz=_num(sbytes // max(spkts, 1)), dmeansz=_num(dbytes // max(dpkts, 1)),
        trans_depth=_num(1 if service == "http" else 0),
        res_bdy_len=_num(int(rng.integers(0, 20000)) if service == "http" and not malicious else 0),
        Sjit=_num(rng.exponential(20.0) if spkts > 2 else 0.0),
        Djit=_num(rng.exponential(15.0) if dpkts > 2 else 0.0),
        Stime=_num(stime), Ltime=_num(stime + int(dur)),
        Sintpkt=_num(dur * 1000 / max(spkts - 1, 1)),
        Dintpkt=_num(dur * 1000 / max(dpkts - 1, 1) if dpkts else 0.0),
        tcprtt=_num(tcprtt), synack=_num(synack), ackdat=_num(ackdat),
        is_sm_ips_ports="0",
        ct_state_ttl=_num(0 if sttl == 31 else (1 if sttl == 62 else 2)),
        ct_flw_http_mthd=(_num(1) if service == "http" else ("" if rng.random() < 0.5 else "0")),
        is_ftp_login=(_num(1) if service == "ftp" and not malicious else ("" if rng.random() < 0.3 else "0")),
        ct_ftp_cmd=("" if rng.random() < 0.3 else "0"),
        attack_cat=attack_cat,
        Label="1" if malicious else "0",
    )
    burst = rng.integers(1, 40) if malicious else rng.integers(1, 12)
    for name in ("ct_srv_src", "ct_srv_dst", "ct_dst_ltm", "ct_src_ltm",
                 "ct_src_dport_ltm", "ct_dst_sport_ltm", "ct_dst_src_ltm"):
        r[name] = _num(max(1, int(burst + rng.integers(-2, 3))))
    return [r[c] for c in UNSW_COLUMNS]


# ---------------------------------------------------------------------------
# KDD Cup 1999
# ---------------------------------------------------------------------------

_KDD_ATTACK_MIX = (("smurf", 0.70), ("neptune", 0.27), ("satan", 0.008), ("ipsweep", 0.006),
                   ("back", 0.005), ("portsweep", 0.004), ("teardrop", 0.003),
                   ("guess_passwd", 0.002), ("warezclient", 0.002))


def _kdd_row(rng, malicious: bool) -> list[str]:
    r = dict.fromkeys(KDD_COLUMNS, "0")
    rates = dict.fromkeys(
        ("serror_rate", "srv_serror_rate", "rerror_rate", "srv_rerror_rate",
         "diff_srv_rate", "srv_diff_host_rate", "dst_host_diff_srv_rate",
         "dst_host_same_src_port_rate", "dst_host_srv_diff_host_rate",
         "dst_host_serror_rate", "dst_host_srv_serror_rate",
         "dst_host_rerror_rate", "dst_host_srv_rerror_rate"), 0.0)
    rates.update(same_srv_rate=1.0, dst_host_same_srv_rate=1.0)
    if not malicious:
        label = "normal."
        kind = rng.choice(["http", "smtp", "ftp_data", "domain_u", "private", "ecr_i", "ftp", "other"],
                          p=[0.62, 0.10, 0.09, 0.08, 0.05, 0.02, 0.02, 0.02])
        proto = {"domain_u": "udp", "private": "udp", "ecr_i": "icmp"}.get(kind, "tcp")
        service = str(kind)
        flag = "SF" if rng.random() < 0.97 else rng.choice(["REJ", "RSTO", "S1"])
        src = int(rng.lognormal(5.4, 0.6)) if proto == "tcp" else int(rng.integers(20, 120))
        dst = int(rng.lognormal(7.5, 1.2)) if proto == "tcp" else int(rng.integers(0, 200))
        if service == "ecr_i":
            src = int(rng.choice([8, 30, 1480]))
        count = int(rng.integers(1, 20))
        srv = int(rng.integers(1, 30))
        dh_count = int(rng.integers(1, 256))
        dh_srv = int(rng.integers(max(1, dh_count // 2), 256))
        r.update(logged_in="1" if proto == "tcp" and flag == "SF" else "0",
                 duration=str(int(rng.exponential(2.0)) if rng.random() < 0.15 else 0))
        rates.update(srv_diff_host_rate=rng.uniform(0, 0.2), dst_host_same_src_port_rate=rng.uniform(0, 0.1),
                     dst_host_srv_diff_host_rate=rng.uniform(0, 0.05), dst_host_same_srv_rate=rng.uniform(0.8, 1.0))
        if service == "ftp" and rng.random() < 0.2:
            r["is_guest_login"] = "1"
        if flag == "REJ":
            rates.update(rerror_rate=1.0, srv_rerror_rate=1.0)
    else:
        names, weights = zip(*_KDD_ATTACK_MIX)
        weights = np.asarray(weights) / np.sum(weights)
        kind = str(rng.choice(names, p=weights))
        label = f"{kind}."
        proto, service, flag = "tcp", "private", "SF"
        src, dst = 0, 0
        count, srv = 1, 1
        dh_count, dh_srv = 255, 255
        if kind == "smurf":
            proto, service = "icmp", "ecr_i"
            src = int(rng.choice([1032, 520]))
            count = srv = int(rng.choice([511, 511, 511, int(rng.integers(100, 511))]))
            rates.update(dst_host_same_src_port_rate=1.0)
        elif kind == "neptune":
            service = "private" if rng.random() < 0.7 else str(rng.choice(["other", "http", "telnet", "ftp"]))
            flag = "S0" if rng.random() < 0.95 else "REJ"
            count = int(rng.integers(100, 300))
            srv = int(rng.integers(1, 25))
            dh_srv = int(rng.integers(1, 25))
            rates.update(same_srv_rate=rng.uniform(0.0, 0.1), diff_srv_rate=rng.uniform(0.05, 0.08),
                         dst_host_same_srv_rate=rng.uniform(0.0, 0.1), dst_host_diff_srv_rate=rng.uniform(0.05, 0.08))
            key = ("serror_rate", "srv_serror_rate", "dst_host_serror_rate", "dst_host_srv_serror_rate")
            if flag == "REJ":
                key = ("rerror_rate", "srv_rerror_rate", "dst_host_rerror_rate", "dst_host_srv_rerror_rate")
            rates.update(dict.fromkeys(key, 1.0))
        elif kind in ("satan", "portsweep"):
            flag = str(rng.choice(["REJ", "RSTR", "S0"]))
            service = str(rng.choice(["other", "private", "ftp", "telnet", "smtp"]))
            count = int(rng.integers(1, 10))
            dh_count = int(rng.integers(1, 255))
            dh_srv = int(rng.integers(1, 10))
            rates.update(rerror_rate=rng.uniform(0.5, 1.0), dst_host_rerror_rate=rng.uniform(0.5, 1.0),
                         dst_host_same_src_port_rate=rng.uniform(0.5, 1.0),
                         dst_host_same_srv_rate=rng.uniform(0, 0.1), diff_srv_rate=rng.uniform(0.5, 1.0))
        elif kind == "ipsweep":
            proto, service = "icmp", str(rng.choice(["eco_i", "ecr_i"]))
            src = int(rng.choice([8, 18]))
            dh_count = int(rng.integers(1, 100))
            dh_srv = int(rng.integers(1, 100))
            rates.update(srv_diff_host_rate=1.0, dst_host_srv_diff_host_rate=rng.uniform(0.3, 1.0),
                         dst_host_same_src_port_rate=1.0)
        elif kind == "back":
            service = "http"
            src = 54540
            dst = int(rng.integers(7000, 8400))
            r.update(hot="2", logged_in="1")
        elif kind == "teardrop":
            proto = "udp"
            src = 28
            r["wrong_fragment"] = "3"
        elif kind == "guess_passwd":
            service, flag = "telnet", "RSTO"
            src, dst = 125, 179
            r["num_failed_logins"] = "1"
            rates.update(rerror_rate=1.0, srv_rerror_rate=1.0)
        elif kind == "warezclient":
            service = str(rng.choice(["ftp_data", "ftp"]))
            src = int(rng.integers(300, 20000))
            r.update(hot=str(int(rng.integers(0, 4))), logged_in="1", is_guest_login="1",
                     duration=str(int(rng.integers(0, 500))))

    r.update(protocol_type=proto, service=service, flag=flag,
             src_bytes=str(src), dst_bytes=str(dst), count=str(count), srv_count=str(srv),
             dst_host_count=str(dh_count), dst_host_srv_count=str(dh_srv),
             **{k: _rate(v) for k, v in rates.items()},
             label=label)
    return [r[c] for c in KDD_COLUMNS]


def _rows(row_fn, n, fraction, seed):
    rng = np.random.default_rng(seed)
    n_mal = int(round(fraction * n))
    flags = np.zeros(n, dtype=bool)
    flags[rng.choice(n, n_mal, replace=False)] = True
    return [row_fn(rng, bool(m)) for m in flags]


def generate_unsw(n: int, seed: int = 0, malicious_fraction: float = UNSW_MALICIOUS_FRACTION) -> RawTable:
    return RawTable(UNSW_SCHEMA, _rows(_unsw_row, n, malicious_fraction, seed))


def generate_kdd(n: int, seed: int = 0, malicious_fraction: float = KDD_MALICIOUS_FRACTION) -> RawTable:
    return RawTable(KDD_SCHEMA, _rows(_kdd_row, n, malicious_fraction, seed))


def write_synthetic(directory: str | Path, n_unsw: int, n_kdd: int, seed: int = 0) -> tuple[Path, Path]:
    """Write ``UNSW-NB15_1.csv`` and ``kddcup.data.csv`` (no header rows) into ``directory``."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    unsw_path = directory / "UNSW-NB15_1.csv"
    kdd_path = directory / "kddcup.data.csv"
    write_csv(generate_unsw(n_unsw, seed), unsw_path)
    write_csv(generate_kdd(n_kdd, seed + 1), kdd_path)
    return unsw_path, kdd_path
