"""
TRA 状态持久化
"""
