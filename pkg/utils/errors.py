"""
Toolkit Errors - 异常层级
每种异常携带 error_code 和 CLI 退出码
"""

from typing import Any, Dict, Optional


class ToolkitError(Exception):
    """工具包基础异常"""

    error_code = "TOOLKIT_ERROR"
    exit_code = 3

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.message = message
        self.details = details or {}


class ConfigurationError(ToolkitError):
    """配置错误: 网格、边界条件、配置文件"""

    error_code = "CONFIG_ERROR"
    exit_code = 1


class ToleranceFailure(ToolkitError):
    """残差超出容差"""

    error_code = "TOLERANCE_FAILURE"
    exit_code = 2


class ImmersionError(ToolkitError):
    """度规退化 (不是浸入)"""

    error_code = "IMMERSION_ERROR"
    exit_code = 3


class FlowError(ToolkitError):
    """梯度流失败, last_state 保存最后一个有效状态, trajectory 由 run_flow 填入"""

    error_code = "FLOW_ERROR"
    exit_code = 3

    def __init__(self, message: str, last_state=None, details: Optional[Dict[str, Any]] = None):
        super().__init__(message, details)
        self.last_state = last_state
        self.trajectory = None


class StagnationError(FlowError):
    """步长下溢"""

    error_code = "STAGNATION"
