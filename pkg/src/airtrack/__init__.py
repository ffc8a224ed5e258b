"""airtrack: aircraft localization and tracking over mixed receiver networks.

Submodules:
    geo       geodetic/ENU conversions and geometry helpers
    channel   air-to-ground link model
    clocks    receiver clock drift simulation
    scenario  simulation scenario types and JSON config I/O
    dataset   synthetic broadcast record generation
    records   record/truth file formats
    stats     KPSS, ACF/PACF, unimodality statistics
    arima     offset-series order selection and fitting
    clocksync offset measurement and the offset/skew Kalman filter
    lstm      recurrent offset predictor with hand-rolled training
    mlat      closed-form TDoA multilateration
    tracker   position/velocity Kalman filter and error metric
    pipeline  end-to-end run orchestration
    cli       command-line entry point
"""

__version__ = "0.1.0"
