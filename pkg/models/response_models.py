"""
Response Models - 输出数据模型
定义审计报告、残差范数、能量、边界力、梯度流摘要和运行清单的 JSON 格式
"""

from datetime import datetime
from typing import Any, Dict, List, Optional

from pydantic import BaseModel, Field


# 基础响应模型 (只有清单和错误带时间戳, 其余输出逐位可复现)
class BaseResponse(BaseModel):
    """基础响应模型"""
    status: str = Field(..., description="响应状态")
    message: str = Field("", description="响应消息")
    timestamp: datetime = Field(default_factory=datetime.utcnow, description="响应时间戳")


class ErrorResponse(BaseResponse):
    """错误响应"""
    error_code: Optional[str] = Field(None, description="错误代码")
    error_details: Optional[Dict[str, Any]] = Field(None, description="错误详情")

    class Config:
        json_schema_extra = {
            "example": {
                "status": "error",
                "message": "degenerate metric at node (12, 0)",
                "timestamp": "2026-01-01T12:00:00Z",
                "error_code": "IMMERSION_ERROR",
                "error_details": {"node": [12, 0], "sqrt_g": 0.0},
            }
        }


class RunManifest(BaseResponse):
    """运行清单: 回显完整解析后的配置"""
    command: str = Field(..., description="子命令")
    artifact_version: str = Field(..., description="工具包版本")
    config: Dict[str, Any] = Field(..., description="完整配置")
    outputs: List[str] = Field(default_factory=list, description="写出的文件")
    exit_code: int = Field(0, description="退出码")


# 恒等式审计
class IdentityEntry(BaseModel):
    """单个恒等式的残差"""
    name: str = Field(..., description="恒等式名称")
    max_residual: float = Field(..., ge=0.0, description="内部节点最大范数")
    l2_residual: float = Field(..., ge=0.0, description="内部区域 L2 范数")
    h1: float = Field(..., description="方向1步长")
    h2: float = Field(..., description="方向2步长")
    worst_node: Optional[List[int]] = Field(None, description="最大残差所在节点 (i1, i2)")

    class Config:
        json_schema_extra = {
            "example": {
                "name": "weingarten",
                "max_residual": 3.1e-8,
                "l2_residual": 1.2e-7,
                "h1": 0.049,
                "h2": 0.049,
                "worst_node": [17, 64],
            }
        }


class IdentityReport(BaseModel):
    """恒等式审计报告"""
    entries: List[IdentityEntry] = Field(default_factory=list, description="各恒等式残差")

    def get(self, name: str) -> IdentityEntry:
        for entry in self.entries:
            if entry.name == name:
                return entry
        raise KeyError(name)

    def max_residuals(self) -> Dict[str, float]:
        return {entry.name: entry.max_residual for entry in self.entries}

    def failures(self, tol: float) -> List[str]:
        return [entry.name for entry in self.entries if not entry.max_residual <= tol]

    def to_json_list(self) -> List[Dict[str, Any]]:
        return [entry.model_dump() for entry in self.entries]


# 应力残差
class NormEntry(BaseModel):
    """残差场范数"""
    name: str = Field(..., description="残差名称")
    max_residual: float = Field(..., ge=0.0, description="最大范数")
    l2_residual: float = Field(..., ge=0.0, description="L2 范数")


class ResidualNorms(BaseModel):
    """应力残差范数"""
    entries: List[NormEntry] = Field(default_factory=list)
    h1: float = Field(..., description="方向1步长")
    h2: float = Field(..., description="方向2步长")

    def get(self, name: str) -> NormEntry:
        for entry in self.entries:
            if entry.name == name:
                return entry
        raise KeyError(name)


class EnergyReport(BaseModel):
    """能量结果"""
    model: str = Field(..., description="能量模型描述")
    energy: float = Field(..., description="总能量")
    area: float = Field(..., description="曲面面积")
    n1: int = Field(..., description="方向1节点数")
    n2: int = Field(..., description="方向2节点数")


class ForceReport(BaseModel):
    """边界力结果"""
    force: List[float] = Field(..., description="力向量 (x, y, z)")
    magnitude: float = Field(..., description="力的大小")
    direction: int = Field(..., description="曲线方向")
    index: int = Field(..., description="固定节点索引")
    retain: str = Field(..., description="保留侧")


class FlowSummary(BaseModel):
    """梯度流摘要"""
    converged: bool = Field(..., description="是否达到容差")
    steps: int = Field(..., description="已接受步数")
    rejected: int = Field(0, description="被拒绝的尝试次数")
    final_energy: float = Field(..., description="最终能量")
    final_max_residual: float = Field(..., description="最终 max|eps|")
    final_dt: float = Field(..., description="最终步长")
    descent_sign: int = Field(..., description="下降符号 sigma")
    neck_radius: Optional[float] = Field(None, description="旋转曲面的最小半径")
    stopped_by: Optional[str] = Field(None, description="梯度流异常终止时的错误码")
