"""
Settings Configuration - 工具包配置管理
支持环境变量 (MEMBRANE_*) 与 .env 文件
"""

from functools import lru_cache
from typing import Optional

from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """应用配置类"""

    model_config = SettingsConfigDict(
        env_prefix="MEMBRANE_",
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False,
        extra="ignore",
    )

    # 基础配置
    environment: str = Field(default="development")
    artifact_version: str = Field(default="1.0.0")

    # 日志配置
    log_level: Optional[str] = Field(default=None)
    log_file: Optional[str] = Field(default=None)
    log_rotation: str = Field(default="10 MB")
    log_retention: str = Field(default="30 days")

    # 并行配置 (逐节点映射)
    threads: int = Field(default=1)
    chunk_rows: int = Field(default=16)

    # 数值配置
    det_epsilon_factor: float = Field(default=1e-12)
    audit_halo: int = Field(default=6)
    default_tol: float = Field(default=1e-6)
    oracle_delta: float = Field(default=1e-5)

    # 输出配置
    output_dir: str = Field(default="out")

    def __init__(self, **kwargs):
        super().__init__(**kwargs)
        self._validate_config()

    def _validate_config(self):
        """验证配置"""
        if self.threads < 1:
            raise ValueError(f"threads must be >= 1, got {self.threads}")

        if self.chunk_rows < 1:
            raise ValueError(f"chunk_rows must be >= 1, got {self.chunk_rows}")

        if self.audit_halo < 0:
            raise ValueError("audit_halo cannot be negative")

        if not 0.0 < self.det_epsilon_factor < 1.0:
            raise ValueError("det_epsilon_factor must lie in (0, 1)")

        if self.environment not in ["development", "testing", "production"]:
            raise ValueError(f"不支持的环境: {self.environment}")

    @property
    def is_development(self) -> bool:
        """是否为开发环境"""
        return self.environment == "development"

    @property
    def is_production(self) -> bool:
        """是否为生产环境"""
        return self.environment == "production"

    @property
    def is_testing(self) -> bool:
        """是否为测试环境"""
        return self.environment == "testing"

    @property
    def console_level(self) -> str:
        if self.log_level:
            return self.log_level.upper()
        return "DEBUG" if self.is_development else "INFO"

    def get_log_config(self) -> dict:
        """获取日志配置"""
        return {
            "level": self.console_level,
            "sink": self.log_file,
            "rotation": self.log_rotation,
            "retention": self.log_retention,
            "compression": "zip" if self.is_production else None,
        }

    def get_parallel_config(self) -> dict:
        """获取并行映射配置"""
        return {"threads": self.threads, "chunk_rows": self.chunk_rows}


@lru_cache()
def get_settings() -> Settings:
    """获取设置实例 (缓存)"""
    return Settings()
