"""
graphwise 핵심 패키지
"""
