"""
命令行界面模块
"""
from cli.main import app, main

__all__ = ["app", "main"]
