from .aodv import AodvAgent
from .dsdv import DsdvAgent
from .dsr import DsrAgent

AGENTS = {"aodv": AodvAgent, "dsr": DsrAgent, "dsdv": DsdvAgent}

__all__ = ["AGENTS", "AodvAgent", "DsdvAgent", "DsrAgent"]
