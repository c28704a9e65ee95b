from cxr.monitoring.logger import initialize_logger, log_event

__all__ = ["initialize_logger", "log_event"]
