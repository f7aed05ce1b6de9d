from rankjoin.runtime.config import SessionConfig
from rankjoin.runtime.dealer import Dealer
from rankjoin.runtime.meter import Meter, MeterReport, Transcript, meter_report
from rankjoin.runtime.session import Session, run_party, run_three
from rankjoin.runtime.transport import LocalHub, SessionAborted, TcpChannel

__all__ = [
    "Dealer",
    "LocalHub",
    "Meter",
    "MeterReport",
    "Session",
    "SessionAborted",
    "SessionConfig",
    "TcpChannel",
    "Transcript",
    "meter_report",
    "run_party",
    "run_three",
]
