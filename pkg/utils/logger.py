"""
Logger Utility - 基于loguru的日志管理工具
stdout 保留给命令结果; 日志只写 stderr 和可选的滚动日志文件
每行带计算阶段标签 (audit / stress / energy / force / flow)
"""

import sys
from typing import Optional

from loguru import logger

from config.settings import get_settings

# 终端: 时间 | 级别 | 阶段 | 模块 | 消息
CONSOLE_FORMAT = (
    "<green>{time:HH:mm:ss.SSS}</green> | "
    "<level>{level: <8}</level> | "
    "<magenta>{extra[stage]: <6}</magenta> | "
    "<cyan>{extra[name]}</cyan> | "
    "<level>{message}</level>"
)

# 日志文件: 完整时间戳和源位置, 便于回查长时间梯度流
FILE_FORMAT = (
    "{time:YYYY-MM-DD HH:mm:ss.SSS} | "
    "{level: <8} | "
    "{extra[stage]} | "
    "{name}:{function}:{line} | "
    "{message}"
)


def setup_logger():
    """按当前 Settings 重建全部 sink"""
    log_config = get_settings().get_log_config()

    logger.remove()
    logger.configure(extra={"stage": "-", "name": "membrane"})

    # colorize=None: 仅在终端上着色, 重定向到文件时输出纯文本
    logger.add(sys.stderr, format=CONSOLE_FORMAT, level=log_config["level"], colorize=None)

    if log_config["sink"]:
        logger.add(
            log_config["sink"],
            format=FILE_FORMAT,
            level="DEBUG",
            rotation=log_config["rotation"],
            retention=log_config["retention"],
            compression=log_config["compression"],
            encoding="utf-8",
        )


def get_logger(name: Optional[str] = None):
    """模块 logger; name 显示在终端行的模块列"""
    return logger.bind(name=name) if name else logger


setup_logger()


def _format_context(**kwargs) -> str:
    return " | ".join(f"{k}={v}" for k, v in kwargs.items())


def log_stage_start(stage: str, **context):
    """记录计算阶段开始"""
    logger.bind(stage=stage).info(f"开始 {stage} - {_format_context(**context)}")


def log_stage_complete(stage: str, duration: float, **context):
    """记录计算阶段完成"""
    logger.bind(stage=stage, performance=True).info(
        f"完成 {stage} - 耗时: {duration:.3f}秒, {_format_context(**context)}"
    )


def log_flow_progress(step: int, energy: float, residual: float, dt: float):
    """记录梯度流进度"""
    logger.bind(stage="flow").debug(
        f"flow step {step}: energy={energy:.10g}, max|eps|={residual:.3e}, dt={dt:.3e}"
    )


def log_performance(operation: str, duration: float, **kwargs):
    """记录性能信息"""
    logger.bind(performance=True).info(
        f"性能统计 - 操作: {operation}, 耗时: {duration:.3f}秒, 详情: {_format_context(**kwargs)}"
    )


class ExceptionLogger:
    """异常日志记录器"""

    @staticmethod
    def log_exception(exc: Exception, context: str = "", **kwargs):
        """记录异常信息"""
        logger.bind(stage=context or "-", exception=True).error(
            f"异常发生 - 上下文: {context}, 异常: {type(exc).__name__}: {exc}, "
            f"详情: {_format_context(**kwargs)}"
        )


__all__ = [
    "get_logger",
    "setup_logger",
    "log_stage_start",
    "log_stage_complete",
    "log_flow_progress",
    "log_performance",
    "ExceptionLogger",
]
