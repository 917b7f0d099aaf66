"""
运行环境与仿真配置
"""
