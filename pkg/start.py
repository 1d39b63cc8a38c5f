from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel, Field
from typing import List
from datetime import datetime
import time

from errors import EngineError

# ============== APP INITIALIZATION (IMMEDIATE - for fast port binding) ==============
app = FastAPI(title="Wavelet Connection Engine", version="1.0.0")

app.add_middleware(
    CORSMiddleware,
    allow_origins=["*"],
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)

print("✅ FastAPI app created!")

# ============== LAZY SERVICE INITIALIZATION ==============
# Filter banks and engines are built on first use, not at startup
_services = {}


def get_config():
    if 'config' not in _services:
        from config import DEFAULT_CONFIG
        _services['config'] = DEFAULT_CONFIG
    return _services['config']


def get_filters(K: int):
    key = f'filters_{K}'
    if key not in _services:
        from filters import daubechies_filters
        _services[key] = daubechies_filters(K)
        print(f"✅ Filters ready for K={K}")
    return _services[key]


def get_connection_engine(K: int):
    key = f'engine_{K}'
    if key not in _services:
        from conncoef import get_engine
        _services[key] = get_engine(get_filters(K), get_config())
    return _services[key]


TABLES = {
    "gamma": ((0, 1), 0),
    "pair": ((1, 1), 0),
    "triple": ((0, 1, 1), 0),
    "F": ((0, 0), 1),
    "G": ((1, 1), 1),
    "E": ((0, 1), 1),
    "overlap": ((0, 0, 0), 0),
    "momentum": ((0, 0, 1), 0),
}


# ============== ENDPOINTS ==============
@app.get("/health")
def health():
    return {
        "status": "healthy",
        "version": app.version,
    }


@app.get("/diagnostics")
def diagnostics():
    """Which engines are warm and which base tables they hold"""
    diag = {
        "timestamp": datetime.now().isoformat(),
        "config": get_config().model_dump(),
        "services": {}
    }
    for key, service in list(_services.items()):
        if key.startswith('engine_'):
            diag["services"][key] = {
                "status": "ready",
                "tables": sorted(t.kind for t in service.tables.values()),
                "cached_queries": len(service.queries),
            }
        elif key.startswith('filters_'):
            diag["services"][key] = {"status": "ready"}
    return diag


@app.get("/api/filters/{K}")
def get_filter_bank(K: int):
    try:
        fb = get_filters(K)
    except EngineError as e:
        raise HTTPException(400, str(e))
    return {
        "success": True,
        "K": fb.K,
        "h": fb.h,
        "g": fb.g,
    }


@app.get("/api/conn/verify")
def verify_tables(K: int = 3):
    """Diff the pair, gamma and triple tables against their golden copies"""
    from conncoef import verify_golden
    try:
        checks = [verify_golden(name, get_filters(K)) for name in ("pair", "gamma", "triple")]
    except EngineError as e:
        raise HTTPException(400, str(e))
    return {
        "success": all(c.ok for c in checks),
        "checks": [dict(c.model_dump(), summary=c.summary()) for c in checks],
    }


@app.get("/api/conn/{table}")
def get_table(table: str, K: int = 3):
    if table not in TABLES:
        raise HTTPException(400, f"Invalid table: {table}; choose from {', '.join(sorted(TABLES))}")
    derivs, q = TABLES[table]
    start = time.time()
    try:
        result = get_connection_engine(K).base_table(derivs, q)
    except EngineError as e:
        raise HTTPException(400, str(e))
    return {
        "success": True,
        "table": table,
        "K": K,
        "derivs": list(result.derivs),
        "q": result.q,
        "count": len(result.entries),
        "entries": [list(index) + [value] for index, value in sorted(result.entries.items())],
        "elapsed_seconds": round(time.time() - start, 4),
    }


class DWTRequest(BaseModel):
    signal: List[float]
    K: int = 3
    levels: int = Field(1, ge=1)


@app.post("/api/dwt/analyze")
def analyze_signal(request: DWTRequest):
    from multiscale import dwt_analyze
    try:
        pyramid = dwt_analyze(request.signal, get_filters(request.K), request.levels)
    except EngineError as e:
        raise HTTPException(400, str(e))
    return {
        "success": True,
        "K": pyramid.K,
        "levels": pyramid.levels,
        "approx": pyramid.approx.tolist(),
        "details": {str(-(i + 1)): d.tolist() for i, d in enumerate(pyramid.details)},
        "energy": pyramid.energy(),
    }


@app.get("/api/ham/spectrum")
def coarse_spectrum(mu: float = 1.0, N: int = 32, K: int = 3, k: int = 0):
    """Coarse-scale eigenvalues next to the mu^2 + D(p) prediction"""
    from hamiltonian import circulant_spectrum
    try:
        report = circulant_spectrum(get_filters(K), mu, N, k)
    except EngineError as e:
        raise HTTPException(400, str(e))
    return {
        "success": True,
        "mu": mu,
        "N": N,
        "eigenvalues": report.computed.tolist(),
        "predicted": sorted(report.predicted.tolist()),
        "max_deviation": report.max_deviation,
    }


@app.get("/api/ham/gamma")
def vacuum_gamma(mu: float = 1.0, k: int = 0, element: str = "scaling", K: int = 3):
    from vacuum import gamma_coefficients
    if element not in ("scaling", "wavelet"):
        raise HTTPException(400, f"Invalid element: {element}")
    try:
        result = gamma_coefficients(get_filters(K), mu, k, element, get_config())
    except EngineError as e:
        raise HTTPException(400, str(e))
    except Exception as e:
        print(f"❌ Gamma computation failed: {e}")
        raise HTTPException(500, str(e))
    return {"success": True, **result.model_dump()}
