"""
HTTP 路由初始化文件
"""
