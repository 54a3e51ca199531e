from powpos_lab.logs.logger import Logger as logger
from powpos_lab.logs.logger import LogLevel

__all__ = ["logger", "LogLevel"]
