"""
Flask JSON service for the estimation commands.
Each endpoint takes a JSON body and returns the same report as the matching
CLI command.
"""

import logging
from datetime import datetime

from flask import Flask, jsonify, request

from config import settings

from .. import __version__
from ..dependence.fx import FXMarket
from ..ingest.files import quotes_from_dict
from ..service import distribution_report, fx_report, moment_report
from ..utils.errors import RnprojError, ValidationError

logger = logging.getLogger(__name__)

# Initialize Flask app
app = Flask(__name__)


def _body():
    data = request.get_json(silent=True)
    if not isinstance(data, dict):
        raise ValidationError("Request body must be a JSON object")
    return data


def _required(data, key):
    if key not in data:
        raise ValidationError(f"Request is missing {key!r}")
    return data[key]


def _optional_float(data, key):
    value = data.get(key)
    if value is None:
        return None
    try:
        return float(value)
    except (TypeError, ValueError):
        raise ValidationError(f"{key} must be a number, got {value!r}")


def _status_for(error: RnprojError) -> int:
    if error.exit_code == 2:
        return 400
    if error.exit_code == 3:
        return 422
    return 500


@app.errorhandler(RnprojError)
def handle_error(error):
    status = _status_for(error)
    logger.error(f"{request.method} {request.path} failed ({status}): {error}")
    return jsonify({"status": "error", "message": str(error)}), status


# ============================================================================
# ESTIMATION ENDPOINTS
# ============================================================================

@app.route('/estimate/moment', methods=['POST'])
def estimate_moment_endpoint():
    """Projection estimate of E[g(S_T)] from univariate quotes."""
    data = _body()
    quotes, info = quotes_from_dict(_required(data, "quotes"))
    report = moment_report(
        str(_required(data, "payoff")), quotes, info,
        bounds=data.get("bounds"),
        grid_points=data.get("grid_points"),
        wls_scale=_optional_float(data, "wls_scale"),
        nonneg=bool(data.get("nonneg", False)),
        weight_floor=_optional_float(data, "weight_floor"),
    )
    logger.info(f"Moment request {report['payoff']}: estimate {report['estimate']:.10g}")
    return jsonify({"status": "success", **report})


@app.route('/estimate/distribution', methods=['POST'])
def estimate_distribution_endpoint():
    """Risk-neutral CDF and PDF on an evaluation grid."""
    data = _body()
    quotes, _ = quotes_from_dict(_required(data, "quotes"))
    dist = distribution_report(
        quotes,
        bounds=data.get("bounds"),
        eval_points=data.get("eval_points"),
        rearrange=bool(data.get("rearrange", False)),
    )
    return jsonify({
        "status": "success",
        "x": dist.eval_points.tolist(),
        "cdf": dist.cdf.tolist(),
        "pdf": dist.pdf.tolist(),
        "monotonized": dist.monotonized,
        "bounds": list(dist.bounds),
    })


@app.route('/fx/correlation', methods=['POST'])
def fx_correlation_endpoint():
    """Covariance, correlation and joint tail of the two dollar legs."""
    data = _body()
    market = FXMarket.from_dict(_required(data, "market"))
    report = fx_report(
        market,
        bounds1=data.get("bounds1"),
        bounds2=data.get("bounds2"),
        grid_points=data.get("grid_points"),
        q1=_optional_float(data, "q1"),
        q2=_optional_float(data, "q2"),
    )
    logger.info(f"FX request: correlation {report['corr']:.4f}")
    return jsonify({"status": "success", **report})


# ============================================================================
# SYSTEM STATUS ENDPOINTS
# ============================================================================

@app.route('/api/status')
def system_status():
    """Get service status and numerical defaults."""
    return jsonify({
        "status": "success",
        "timestamp": datetime.now().isoformat(),
        "version": __version__,
        "defaults": {
            "threads": settings.THREADS,
            "grid_points": settings.DEFAULT_GRID_POINTS,
            "eval_points": settings.DEFAULT_EVAL_POINTS,
            "joint_grid_points": settings.DEFAULT_JOINT_GRID_POINTS,
        },
    })


# ============================================================================
# MAIN APPLICATION
# ============================================================================

def main():
    """Run the estimation service."""
    logging.basicConfig(level=settings.LOG_LEVEL)
    try:
        logger.info(f"Starting rnproj service on http://{settings.WEB_HOST}:{settings.WEB_PORT}")
        app.run(host=settings.WEB_HOST, port=settings.WEB_PORT, debug=False, threaded=True)
    except KeyboardInterrupt:
        logger.info("Shutting down rnproj service...")


if __name__ == '__main__':
    main()
